#include "deepbf/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <tuple>
#include <type_traits>

#include "deepbf/criticism.hpp"
#include "deepbf/csv.hpp"
#include "deepbf/error.hpp"
#include "deepbf/evalkit.hpp"
#include "deepbf/kernels.hpp"
#include "deepbf/parallel.hpp"
#include "deepbf/svg.hpp"

namespace deepbf::cli {

namespace {

// RNG stream ids per command, so commands sharing a seed stay independent.
constexpr std::uint64_t kSimulateStream = 11;
constexpr std::uint64_t kTrainStream = 12;
constexpr std::uint64_t kEstimateStream = 13;
constexpr std::uint64_t kAbcStream = 14;
constexpr std::uint64_t kEvaluateStream = 15;
constexpr std::uint64_t kCriticizeStream = 16;

// Reads one JSON object, remembering which keys were consumed so that
// leftovers can be reported as unknown.
class Reader {
public:
    Reader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(label() + " must be a JSON object");
    }

    template <class T>
    void opt(const char* key, T& out) {
        const auto it = j_.find(key);
        if (it == j_.end()) return;
        seen_.insert(key);
        const Json& v = *it;
        const std::string where = qualified(key);
        if constexpr (std::is_same_v<T, std::string>) {
            if (!v.is_string()) throw ConfigError(where + " must be a string");
            out = v.get<std::string>();
        } else if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean()) throw ConfigError(where + " must be a boolean");
            out = v.get<bool>();
        } else if constexpr (std::is_integral_v<T>) {
            if (!v.is_number_unsigned()) throw ConfigError(where + " must be a nonnegative integer");
            out = v.get<T>();
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!v.is_number()) throw ConfigError(where + " must be a number");
            out = v.get<T>();
        } else {
            static_assert(std::is_same_v<T, std::vector<std::size_t>>);
            if (!v.is_array()) throw ConfigError(where + " must be an array of nonnegative integers");
            out.clear();
            for (const Json& e : v) {
                if (!e.is_number_unsigned()) throw ConfigError(where + " must be an array of nonnegative integers");
                out.push_back(e.get<std::size_t>());
            }
        }
    }

    const Json* section(const char* key) {
        const auto it = j_.find(key);
        if (it == j_.end()) return nullptr;
        seen_.insert(key);
        return &*it;
    }

    std::string qualified(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    void finish() const {
        for (const auto& item : j_.items())
            if (!seen_.count(item.key())) throw ConfigError("unknown configuration key '" + qualified(item.key()) + "'");
    }

private:
    const Json& j_;
    std::string path_;
    std::set<std::string> seen_;

    std::string label() const { return path_.empty() ? "configuration" : "'" + path_ + "'"; }
};

Json arch_config_json(const ArchSpec& a) {
    Json j;
    j["kind"] = to_string(a.kind);
    j["width"] = a.width;
    j["depth"] = a.depth;
    j["first_width"] = a.first_width;
    j["reduction_ratio"] = a.reduction_ratio;
    j["min_width"] = a.min_width;
    j["q"] = a.q;
    j["inner_widths"] = a.inner_widths;
    return j;
}

void check_model_role(const std::string& v, const std::string& where) {
    if (v != "m1" && v != "m2") throw ConfigError(where + " must be \"m1\" or \"m2\"");
}

const ModelSpec& pick(const ModelPair& pair, const std::string& role) { return role == "m1" ? pair.m1 : pair.m2; }

std::uint64_t command_hash(const Json& base, const Json& command) {
    Json j = base;
    j["command"] = command;
    return config_hash(j);
}

std::string join_path(const std::string& dir, const std::string& file) {
    return (std::filesystem::path(dir) / file).string();
}

void wrote(const std::string& path) { std::cerr << "deepbf: wrote " << path << "\n"; }

std::vector<std::size_t> parse_index_list(const std::string& text) {
    std::vector<std::size_t> out;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        const double v = parse_number(tok);
        if (!(v >= 0.0) || v != std::floor(v)) throw ConfigError("split indices must be nonnegative integers");
        out.push_back(static_cast<std::size_t>(v));
    }
    return out;
}

ModelPair pair_of(const BfEstimator& est) {
    Hyperparams hp = est.hyperparams;
    hp["prior_m1"] = est.prior_m1;
    return make_builtin_pair(est.pair_name, hp);
}

// log BF of m1 against m2, whichever direction the estimator was trained in.
LogBfEvaluator oriented_evaluator(const BfEstimator& est) {
    return [&est](std::span<const Data> ys) {
        std::vector<double> v = estimate_log_bf_batch(est, ys);
        if (est.direction == Direction::m2_vs_m1)
            for (double& x : v) x = -x;
        return v;
    };
}

// Exact evaluator when both closed forms apply at this n.
std::optional<LogBfEvaluator> exact_if_available(const ModelPair& pair, std::size_t n) {
    if (!pair.m1.exact_log_marginal || !pair.m2.exact_log_marginal) return std::nullopt;
    RngStream probe(0, 0);
    try {
        (void)exact_log_bf(pair, simulate_dataset(pair.m1, n, probe));
    } catch (const NoOracle&) {
        return std::nullopt;
    }
    return exact_evaluator(pair);
}

std::vector<Data> simulate_from(const ModelSpec& model, std::size_t n, std::size_t count, const RngStream& rng) {
    std::vector<Data> out(count);
    parallel_for(count, [&](std::size_t i) {
        RngStream r = rng.substream(i);
        out[i] = simulate_dataset(model, n, r);
    });
    return out;
}

// ---- subcommands -----------------------------------------------------------

struct SimulateArgs {
    std::string config, model, out;
    std::size_t count = 0;
};

void cmd_simulate(const SimulateArgs& a) {
    const RunConfig cfg = load_run_config(a.config);
    const std::string role = a.model.empty() ? cfg.simulate_model : a.model;
    check_model_role(role, "--model");
    const std::size_t count = a.count != 0 ? a.count : cfg.simulate_count;
    const ModelPair pair = cfg.make_pair();
    const RngStream rng = new_stream(cfg.seed, kSimulateStream);
    const std::vector<Data> ys = simulate_from(pick(pair, role), cfg.n, count, rng);

    std::vector<std::string> header;
    for (std::size_t i = 1; i <= cfg.n; ++i) header.push_back("y" + std::to_string(i));
    CsvWriter w(header);
    w.comment(provenance_comment(command_hash(cfg.to_json(), {{"simulate", {{"model", role}, {"count", count}}}}),
                                 cfg.seed));
    for (const Data& y : ys) {
        std::vector<std::string> row;
        for (double v : y) row.push_back(format_number(v));
        w.row(row);
    }
    const std::string out = a.out.empty() ? join_path(cfg.output_dir, "simulated.csv") : a.out;
    write_file_atomic(out, w.str());
    wrote(out);
}

struct TrainArgs {
    std::string config, direction, out;
    std::size_t n = 0;
};

void cmd_train(const TrainArgs& a) {
    const RunConfig cfg = load_run_config(a.config);
    const std::size_t n = a.n != 0 ? a.n : cfg.n;
    TrainConfig tc = cfg.train;
    tc.seed = cfg.seed;
    if (!a.direction.empty()) tc.direction = parse_direction(a.direction);
    const ModelPair pair = cfg.make_pair();
    RngStream rng = new_stream(cfg.seed, kTrainStream);
    const BfEstimator est = train(pair, n, tc, rng);
    const std::string out = a.out.empty() ? join_path(cfg.output_dir, "checkpoint.json") : a.out;
    write_file_atomic(out, save_estimator(est));
    wrote(out);
}

struct EstimateArgs {
    std::string checkpoint, data, out, rev_sub, split, double_ckpt, rev;
    std::size_t reference_count = 1000;
    std::size_t subset_limit = 1000;
    std::uint64_t seed = 0;
    bool seed_given = false;
};

void cmd_estimate(const EstimateArgs& a) {
    const BfEstimator est = load_estimator(read_file(a.checkpoint));
    const std::vector<Data> ys = parse_data_csv(read_file(a.data));
    const std::uint64_t seed = a.seed_given ? a.seed : est.seed;
    const std::vector<double> log_bf = estimate_log_bf_batch(est, ys);
    const std::vector<double> bf = estimate_bf_batch(est, ys);

    std::vector<std::string> header{"row", "bf", "log_bf"};
    const RngStream rng = new_stream(seed, kEstimateStream);

    std::vector<double> ref1, ref2;
    if (a.reference_count > 0) {
        const ModelPair pair = pair_of(est);
        const ModelSpec& pos = est.direction == Direction::m1_vs_m2 ? pair.m1 : pair.m2;
        const ModelSpec& neg = est.direction == Direction::m1_vs_m2 ? pair.m2 : pair.m1;
        ref1 = estimate_log_bf_batch(est, simulate_from(pos, est.n, a.reference_count, rng.substream(1)));
        ref2 = estimate_log_bf_batch(est, simulate_from(neg, est.n, a.reference_count, rng.substream(2)));
        header.insert(header.end(), {"p1", "p2"});
    }

    std::optional<BfEstimator> rev_sub, dbl, rev;
    std::vector<std::size_t> split;
    if (!a.rev_sub.empty()) {
        rev_sub = load_estimator(read_file(a.rev_sub));
        if (a.split.empty()) {
            split.resize(rev_sub->n);
            for (std::size_t i = 0; i < split.size(); ++i) split[i] = i;
        } else {
            split = parse_index_list(a.split);
        }
        header.insert(header.end(), {"pbf", "abf", "gbf"});
    } else if (!a.split.empty()) {
        throw ConfigError("--split needs --rev-sub");
    }
    if (a.double_ckpt.empty() != a.rev.empty()) throw ConfigError("--double and --rev must be given together");
    if (!a.double_ckpt.empty()) {
        dbl = load_estimator(read_file(a.double_ckpt));
        rev = load_estimator(read_file(a.rev));
        header.push_back("posterior_bf");
    }

    Json command{{"checkpoint_hash", hash_hex(est.train_config_hash)},
                 {"reference_count", a.reference_count},
                 {"subset_limit", a.subset_limit},
                 {"split", split}};
    if (rev_sub) command["rev_sub_hash"] = hash_hex(rev_sub->train_config_hash);
    if (dbl) command["double_hash"] = hash_hex(dbl->train_config_hash), command["rev_hash"] = hash_hex(rev->train_config_hash);
    CsvWriter w(header);
    w.comment(provenance_comment(config_hash(command), seed));
    for (std::size_t r = 0; r < ys.size(); ++r) {
        std::vector<std::string> row{std::to_string(r), format_number(bf[r]), format_number(log_bf[r])};
        if (a.reference_count > 0) {
            const SurprisePair p = surprise(log_bf[r], ref1, ref2);
            row.push_back(format_number(p.p1));
            row.push_back(format_number(p.p2));
        }
        if (rev_sub) {
            row.push_back(format_number(partial_bf(est, *rev_sub, ys[r], split)));
            RngStream ra = rng.substream(3).substream(r);
            RngStream rg = rng.substream(3).substream(r);
            row.push_back(format_number(
                intrinsic_bf(est, *rev_sub, ys[r], rev_sub->n, IntrinsicMode::arithmetic, a.subset_limit, ra)));
            row.push_back(format_number(
                intrinsic_bf(est, *rev_sub, ys[r], rev_sub->n, IntrinsicMode::geometric, a.subset_limit, rg)));
        }
        if (dbl) row.push_back(format_number(posterior_bf(*dbl, *rev, ys[r])));
        w.row(row);
    }
    const std::string out = a.out.empty() ? "estimates.csv" : a.out;
    write_file_atomic(out, w.str());
    wrote(out);
}

struct AbcArgs {
    std::string config, data, out;
};

void cmd_abc(const AbcArgs& a) {
    const RunConfig cfg = load_run_config(a.config);
    const std::vector<Data> ys = parse_data_csv(read_file(a.data));
    const ModelPair pair = cfg.make_pair();
    RngStream rng = new_stream(cfg.seed, kAbcStream);
    const std::vector<AbcResult> res = abc_estimate_batch(pair, ys, cfg.abc, rng);
    CsvWriter w({"query", "estimate", "n1", "n2", "exact"});
    w.comment(provenance_comment(command_hash(cfg.to_json(), {{"abc", {{"queries", ys.size()}}}}), cfg.seed));
    for (std::size_t q = 0; q < res.size(); ++q)
        w.row({std::to_string(q), format_number(res[q].estimate), std::to_string(res[q].n1), std::to_string(res[q].n2),
               res[q].exact ? "true" : "false"});
    const std::string out = a.out.empty() ? join_path(cfg.output_dir, "abc.csv") : a.out;
    write_file_atomic(out, w.str());
    wrote(out);
}

struct EvaluateArgs {
    std::string config, checkpoint, out_dir;
};

void cmd_evaluate(const EvaluateArgs& a) {
    const RunConfig cfg = load_run_config(a.config);
    const BfEstimator est = load_estimator(read_file(a.checkpoint));
    const ModelPair pair = pair_of(est);
    const LogBfEvaluator evaluator = oriented_evaluator(est);
    const auto exact = exact_if_available(pair, est.n);
    RngStream rng = new_stream(cfg.seed, kEvaluateStream);
    const EvalReport rep =
        evaluate(evaluator, exact ? &*exact : nullptr, pair, est.n, cfg.eval_t0, cfg.eval_grid_points, rng);

    const std::uint64_t h =
        command_hash(cfg.to_json(), {{"evaluate", {{"checkpoint_hash", hash_hex(est.train_config_hash)}}}});
    const std::string dir = a.out_dir.empty() ? cfg.output_dir : a.out_dir;

    CsvWriter metrics({"name", "value", "model", "n", "seed"});
    metrics.comment(provenance_comment(h, cfg.seed));
    Json summary;
    summary["artifact_version"] = DEEPBF_VERSION;
    summary["config_hash"] = hash_hex(h);
    summary["seed"] = cfg.seed;
    summary["n"] = est.n;
    summary["t0"] = cfg.eval_t0;
    Json values = Json::object();
    for (const Metric& m : rep.metrics) {
        metrics.row({m.name, format_number(m.value), m.model, std::to_string(est.n), std::to_string(cfg.seed)});
        values[m.model == "all" ? m.name : m.name + "_" + m.model] = format_number(m.value);
    }
    summary["metrics"] = std::move(values);

    CsvWriter samples({"model", "true_log_bf", "est_log_bf"});
    samples.comment(provenance_comment(h, cfg.seed));
    const BfSampleSet& s = rep.samples;
    for (int k = 1; k <= 2; ++k) {
        const auto& e = k == 1 ? s.est_m1 : s.est_m2;
        const auto& t = k == 1 ? s.true_m1 : s.true_m2;
        for (std::size_t i = 0; i < e.size(); ++i)
            samples.row({k == 1 ? "m1" : "m2", t.empty() ? "nan" : format_number(t[i]), format_number(e[i])});
    }

    for (const auto& [name, body] : {std::pair<std::string, std::string>{"eval_metrics.csv", metrics.str()},
                                     {"eval_samples.csv", samples.str()},
                                     {"eval_summary.json", summary.dump(2) + "\n"}}) {
        const std::string path = join_path(dir, name);
        write_file_atomic(path, body);
        wrote(path);
    }
}

struct CriticizeArgs {
    std::string config, data, model, out_dir;
    std::size_t row = 0;
};

void cmd_criticize(const CriticizeArgs& a) {
    const RunConfig cfg = load_run_config(a.config);
    const std::vector<Data> ys = parse_data_csv(read_file(a.data));
    if (a.row >= ys.size()) throw ConfigError("--row " + std::to_string(a.row) + " is past the end of the data file");
    const std::string role = a.model.empty() ? cfg.criticize_model : a.model;
    check_model_role(role, "--model");
    const ModelPair pair = cfg.make_pair();
    RngStream rng = new_stream(cfg.seed, kCriticizeStream);
    const ZReport rep = criticize(pick(pair, role), ys[a.row], cfg.criticize_replicates, rng);

    const std::uint64_t h = command_hash(cfg.to_json(), {{"criticize", {{"model", role}, {"row", a.row}}}});
    CsvWriter w({"replicate", "z"});
    w.comment(provenance_comment(h, cfg.seed));
    for (std::size_t r = 0; r < rep.z.size(); ++r) w.row({std::to_string(r), format_number(rep.z[r])});
    Json summary;
    summary["artifact_version"] = DEEPBF_VERSION;
    summary["config_hash"] = hash_hex(h);
    summary["seed"] = cfg.seed;
    summary["model"] = role;
    summary["replicates"] = rep.z.size();
    summary["interval"] = {format_number(rep.lo), format_number(rep.hi)};
    summary["contains_half"] = rep.contains_half;

    const std::string dir = a.out_dir.empty() ? cfg.output_dir : a.out_dir;
    for (const auto& [name, body] : {std::pair<std::string, std::string>{"zreport.csv", w.str()},
                                     {"zreport.json", summary.dump(2) + "\n"}}) {
        const std::string path = join_path(dir, name);
        write_file_atomic(path, body);
        wrote(path);
    }
}

struct ReportArgs {
    std::string input, out_dir;
};

std::vector<std::pair<double, double>> kde_curve(const std::vector<double>& v, const Grid& g) {
    const Kde k = make_kde(v);
    std::vector<std::pair<double, double>> pts;
    for (std::size_t i = 0; i < g.count; ++i) pts.emplace_back(g.at(i), k(g.at(i)));
    return pts;
}

void cmd_report(const ReportArgs& a) {
    namespace fs = std::filesystem;
    const std::string out_dir = a.out_dir.empty() ? a.input : a.out_dir;
    bool any = false;
    auto emit = [&](const std::string& name, const svg::Plot& plot) {
        const std::string path = join_path(out_dir, name);
        write_file_atomic(path, svg::render(plot));
        wrote(path);
        any = true;
    };

    const std::string samples_path = join_path(a.input, "eval_samples.csv");
    if (fs::exists(samples_path)) {
        const CsvTable t = parse_csv(read_file(samples_path));
        const std::size_t cm = t.column("model"), ct = t.column("true_log_bf"), ce = t.column("est_log_bf");
        std::vector<double> t1, e1, t2, e2;
        for (const auto& row : t.rows) {
            const bool m1 = row[cm] == "m1";
            (m1 ? t1 : t2).push_back(parse_number(row[ct]));
            (m1 ? e1 : e2).push_back(parse_number(row[ce]));
        }
        const bool has_truth = !t1.empty() && std::none_of(t1.begin(), t1.end(), [](double v) { return std::isnan(v); });

        svg::Plot kde{"KDE of log Bayes factors", "log BF", "density", {}, false};
        for (const auto& [label, est, tru] : {std::tuple{"m1", &e1, &t1}, std::tuple{"m2", &e2, &t2}}) {
            if (est->empty()) continue;
            const Kde ke = make_kde(*est);
            const Kde kt = has_truth ? make_kde(*tru) : ke;
            const Grid g = kde_grid(ke, kt, 256);
            kde.series.push_back({std::string("estimated, ") + label, kde_curve(*est, g), false});
            if (has_truth) kde.series.push_back({std::string("exact, ") + label, kde_curve(*tru, g), false});
        }
        emit("kde.svg", kde);

        svg::Plot roc{"ROC", "false positive rate", "true positive rate", {}, true};
        roc.series.push_back({"estimated (AUC " + format_number(auc(e1, e2)) + ")", roc_auc(e1, e2).curve, false});
        if (has_truth)
            roc.series.push_back({"exact (AUC " + format_number(auc(t1, t2)) + ")", roc_auc(t1, t2).curve, false});
        emit("roc.svg", roc);

        if (has_truth) {
            svg::Plot sc{"Estimated against exact log BF", "exact log BF", "estimated log BF", {}, true};
            for (const auto& [label, est, tru] : {std::tuple{"m1", &e1, &t1}, std::tuple{"m2", &e2, &t2}}) {
                svg::Series s{label, {}, true};
                for (std::size_t i = 0; i < est->size(); ++i) s.points.emplace_back((*tru)[i], (*est)[i]);
                sc.series.push_back(std::move(s));
            }
            emit("scatter.svg", sc);
        }
    }

    const std::string z_path = join_path(a.input, "zreport.csv");
    if (fs::exists(z_path)) {
        const CsvTable t = parse_csv(read_file(z_path));
        const std::size_t cz = t.column("z");
        std::vector<double> z;
        for (const auto& row : t.rows) z.push_back(parse_number(row[cz]));
        std::sort(z.begin(), z.end());
        svg::Series s{"empirical CDF of z", {}, false};
        for (std::size_t i = 0; i < z.size(); ++i)
            s.points.emplace_back(z[i], static_cast<double>(i + 1) / static_cast<double>(z.size()));
        svg::Series half{"z = 0.5", {{0.5, 0.0}, {0.5, 1.0}}, false};
        emit("z.svg", {"Criticism z statistics", "z", "cumulative share", {s, half}, false});
    }
    if (!any) throw ConfigError("no eval_samples.csv or zreport.csv in '" + a.input + "'");
}

} // namespace

Json RunConfig::to_json() const {
    Json j;
    Json pair;
    pair["name"] = pair_name;
    Json hp = Json::object();
    for (const auto& [k, v] : hyperparams) hp[k] = v;
    pair["hyperparams"] = std::move(hp);
    pair["prior_m1"] = prior_m1;
    j["pair"] = std::move(pair);
    j["n"] = n;
    j["seed"] = seed;
    Json t;
    t["iterations"] = train.iterations;
    t["minibatch_per_model"] = train.minibatch_per_model;
    t["eval_reference_batch"] = train.eval_reference_batch;
    t["direction"] = to_string(train.direction);
    t["eps"] = train.eps;
    t["arch"] = arch_config_json(train.arch);
    t["adam"] = deepbf::to_json(train.adam);
    j["train"] = std::move(t);
    j["abc"] = {{"total_samples", abc.total_samples},
                {"strata", abc.strata},
                {"per_stratum_keep", abc.per_stratum_keep},
                {"final_keep", abc.final_keep},
                {"distance", to_string(abc.distance)}};
    j["eval"] = {{"t0", eval_t0}, {"grid_points", eval_grid_points}};
    j["criticize"] = {{"replicates", criticize_replicates}, {"model", criticize_model}};
    j["simulate"] = {{"count", simulate_count}, {"model", simulate_model}};
    j["output_dir"] = output_dir;
    return j;
}

ModelPair RunConfig::make_pair() const {
    Hyperparams hp = hyperparams;
    hp["prior_m1"] = prior_m1;
    ModelPair p = make_builtin_pair(pair_name, hp);
    p.validate();
    return p;
}

RunConfig parse_run_config(const Json& j) {
    RunConfig c;
    Reader root(j, "");
    if (const Json* p = root.section("pair")) {
        Reader r(*p, "pair");
        r.opt("name", c.pair_name);
        r.opt("prior_m1", c.prior_m1);
        if (const Json* hp = r.section("hyperparams")) {
            if (!hp->is_object()) throw ConfigError("pair.hyperparams must be a JSON object");
            for (const auto& item : hp->items()) {
                if (!item.value().is_number())
                    throw ConfigError("pair.hyperparams." + item.key() + " must be a number");
                c.hyperparams[item.key()] = item.value().get<double>();
            }
        }
        r.finish();
    }
    root.opt("n", c.n);
    root.opt("seed", c.seed);
    root.opt("output_dir", c.output_dir);
    if (const Json* t = root.section("train")) {
        Reader r(*t, "train");
        r.opt("iterations", c.train.iterations);
        r.opt("minibatch_per_model", c.train.minibatch_per_model);
        r.opt("eval_reference_batch", c.train.eval_reference_batch);
        r.opt("eps", c.train.eps);
        std::string dir = to_string(c.train.direction);
        r.opt("direction", dir);
        c.train.direction = parse_direction(dir);
        if (const Json* arch = r.section("arch")) {
            Reader ar(*arch, "train.arch");
            std::string kind = to_string(c.train.arch.kind);
            ar.opt("kind", kind);
            c.train.arch.kind = parse_arch_kind(kind);
            ar.opt("width", c.train.arch.width);
            ar.opt("depth", c.train.arch.depth);
            ar.opt("first_width", c.train.arch.first_width);
            ar.opt("reduction_ratio", c.train.arch.reduction_ratio);
            ar.opt("min_width", c.train.arch.min_width);
            ar.opt("q", c.train.arch.q);
            ar.opt("inner_widths", c.train.arch.inner_widths);
            ar.finish();
        }
        if (const Json* adam = r.section("adam")) {
            Reader ad(*adam, "train.adam");
            ad.opt("lr", c.train.adam.lr);
            ad.opt("beta1", c.train.adam.beta1);
            ad.opt("beta2", c.train.adam.beta2);
            ad.opt("epsilon", c.train.adam.epsilon);
            ad.opt("decay", c.train.adam.decay);
            ad.opt("decay_every", c.train.adam.decay_every);
            ad.finish();
        }
        r.finish();
    }
    if (const Json* a = root.section("abc")) {
        Reader r(*a, "abc");
        r.opt("total_samples", c.abc.total_samples);
        r.opt("strata", c.abc.strata);
        r.opt("per_stratum_keep", c.abc.per_stratum_keep);
        r.opt("final_keep", c.abc.final_keep);
        std::string dist = to_string(c.abc.distance);
        r.opt("distance", dist);
        c.abc.distance = parse_abc_distance(dist);
        r.finish();
    }
    if (const Json* e = root.section("eval")) {
        Reader r(*e, "eval");
        r.opt("t0", c.eval_t0);
        r.opt("grid_points", c.eval_grid_points);
        r.finish();
    }
    if (const Json* cr = root.section("criticize")) {
        Reader r(*cr, "criticize");
        r.opt("replicates", c.criticize_replicates);
        r.opt("model", c.criticize_model);
        r.finish();
    }
    if (const Json* s = root.section("simulate")) {
        Reader r(*s, "simulate");
        r.opt("count", c.simulate_count);
        r.opt("model", c.simulate_model);
        r.finish();
    }
    root.finish();

    // Semantic checks, all before any computation.
    if (c.n < 1) throw ConfigError("n must be at least 1");
    if (c.eval_t0 < 2) throw ConfigError("eval.t0 must be at least 2");
    if (c.eval_grid_points < 2) throw ConfigError("eval.grid_points must be at least 2");
    if (c.criticize_replicates < 100) throw ConfigError("criticize.replicates must be at least 100");
    if (c.simulate_count < 1) throw ConfigError("simulate.count must be at least 1");
    check_model_role(c.criticize_model, "criticize.model");
    check_model_role(c.simulate_model, "simulate.model");
    c.train.validate();
    c.abc.validate();
    (void)c.make_pair();
    return c;
}

RunConfig load_run_config(const std::string& path) {
    const std::string text = read_file(path);
    Json j;
    try {
        j = Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
    }
    try {
        return parse_run_config(j);
    } catch (const InvalidParameter& e) {
        throw ConfigError(std::string("'") + path + "': " + e.what());
    }
}

int run_command(const std::vector<std::string>& args) {
    CLI::App app{"Bayes factors between simulator-defined models"};
    app.name(args.empty() ? "deepbf" : std::filesystem::path(args[0]).filename().string());
    app.require_subcommand(1);
    app.set_version_flag("--version", DEEPBF_VERSION);

    SimulateArgs sim;
    auto* c_sim = app.add_subcommand("simulate", "Write simulated datasets as CSV");
    c_sim->add_option("--config", sim.config, "Run configuration JSON")->required();
    c_sim->add_option("--model", sim.model, "m1 or m2 (default: simulate.model)");
    c_sim->add_option("--count", sim.count, "Number of datasets (default: simulate.count)");
    c_sim->add_option("--out", sim.out, "Output CSV (default: <output_dir>/simulated.csv)");

    TrainArgs tr;
    auto* c_train = app.add_subcommand("train", "Train a Bayes-factor classifier and write a checkpoint");
    c_train->add_option("--config", tr.config, "Run configuration JSON")->required();
    c_train->add_option("--n", tr.n, "Dataset length (default: n)");
    c_train->add_option("--direction", tr.direction, "m1_vs_m2 or m2_vs_m1 (default: train.direction)");
    c_train->add_option("--out", tr.out, "Checkpoint path (default: <output_dir>/checkpoint.json)");

    EstimateArgs es;
    auto* c_est = app.add_subcommand("estimate", "Estimate Bayes factors for observed datasets");
    c_est->add_option("--checkpoint", es.checkpoint, "Checkpoint JSON")->required();
    c_est->add_option("--data", es.data, "Observed data CSV, one dataset per row")->required();
    c_est->add_option("--out", es.out, "Output CSV (default: estimates.csv)");
    c_est->add_option("--reference-count", es.reference_count,
                      "Simulated datasets per model for the surprise columns (0 disables)");
    auto* seed_opt = c_est->add_option("--seed", es.seed, "Seed for reference simulations (default: checkpoint seed)");
    c_est->add_option("--rev-sub", es.rev_sub, "Reversed-direction checkpoint on a subset length (adds pbf, abf, gbf)");
    c_est->add_option("--split", es.split, "Comma-separated indices forming the partial-BF training part");
    c_est->add_option("--subset-limit", es.subset_limit, "Maximum number of subsets for abf and gbf");
    c_est->add_option("--double", es.double_ckpt, "Checkpoint trained on length 2n (with --rev adds posterior_bf)");
    c_est->add_option("--rev", es.rev, "Reversed-direction checkpoint on length n");

    AbcArgs ab;
    auto* c_abc = app.add_subcommand("abc", "Stratified rank-based ABC Bayes factors");
    c_abc->add_option("--config", ab.config, "Run configuration JSON")->required();
    c_abc->add_option("--data", ab.data, "Observed data CSV, one dataset per row")->required();
    c_abc->add_option("--out", ab.out, "Output CSV (default: <output_dir>/abc.csv)");

    EvaluateArgs ev;
    auto* c_eval = app.add_subcommand("evaluate", "Estimation and inference metrics on simulated data");
    c_eval->add_option("--config", ev.config, "Run configuration JSON")->required();
    c_eval->add_option("--checkpoint", ev.checkpoint, "Checkpoint JSON")->required();
    c_eval->add_option("--out-dir", ev.out_dir, "Output directory (default: output_dir)");

    CriticizeArgs cr;
    auto* c_crit = app.add_subcommand("criticize", "Posterior-predictive criticism of one model");
    c_crit->add_option("--config", cr.config, "Run configuration JSON")->required();
    c_crit->add_option("--data", cr.data, "Observed data CSV")->required();
    c_crit->add_option("--row", cr.row, "Row of the data file to criticise (default 0)");
    c_crit->add_option("--model", cr.model, "m1 or m2 (default: criticize.model)");
    c_crit->add_option("--out-dir", cr.out_dir, "Output directory (default: output_dir)");

    ReportArgs rp;
    auto* c_rep = app.add_subcommand("report", "Render SVG figures from evaluate/criticize outputs");
    c_rep->add_option("--input", rp.input, "Directory holding eval_samples.csv and/or zreport.csv")->required();
    c_rep->add_option("--out-dir", rp.out_dir, "Output directory (default: the input directory)");

    std::vector<char*> argv;
    std::vector<std::string> storage = args.empty() ? std::vector<std::string>{"deepbf"} : args;
    for (auto& s : storage) argv.push_back(s.data());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }
    es.seed_given = seed_opt->count() > 0;

    try {
        if (c_sim->parsed()) cmd_simulate(sim);
        else if (c_train->parsed()) cmd_train(tr);
        else if (c_est->parsed()) cmd_estimate(es);
        else if (c_abc->parsed()) cmd_abc(ab);
        else if (c_eval->parsed()) cmd_evaluate(ev);
        else if (c_crit->parsed()) cmd_criticize(cr);
        else if (c_rep->parsed()) cmd_report(rp);
        return kOk;
    } catch (const NumericFailure& e) {
        std::cerr << "deepbf: numeric failure: " << e.what() << "\n";
        return kNumeric;
    } catch (const Error& e) {
        std::cerr << "deepbf: " << e.what() << "\n";
        return kConfig;
    } catch (const std::exception& e) {
        std::cerr << "deepbf: " << e.what() << "\n";
        return kConfig;
    }
}

} // namespace deepbf::cli
