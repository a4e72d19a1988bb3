// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "deepbf/abc.hpp"
#include "deepbf/cli.hpp"
#include "deepbf/criticism.hpp"
#include "deepbf/estimator.hpp"
#include "deepbf/evalkit.hpp"
#include "deepbf/models.hpp"
#include "deepbf/nn.hpp"
#include "support/abc_oracle.hpp"
#include "support/estimators.hpp"
#include "support/gradcheck.hpp"
#include "support/quadrature.hpp"

using namespace deepbf;
using namespace deepbf::testing;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

LogBfEvaluator estimator_evaluator(const BfEstimator& est) {
    return [&est](std::span<const Data> ys) { return estimate_log_bf_batch(est, ys); };
}

// 1. Closed-form marginals against quadrature.
Outcome oracle_correctness() {
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0.0;
    bool antisymmetric = true;
    for (const char* name : {"data1", "data3"}) {
        const ModelPair p = make_builtin_pair(name);
        const ModelPair q = p.swapped();
        const bool d1 = std::string(name) == "data1";
        for (std::size_t n : {1, 2, 8, 32}) {
            RngStream r = new_stream(101, n);
            for (int i = 0; i < 100; ++i) {
                const Data y = simulate_dataset(i % 2 ? p.m1 : p.m2, n, r);
                const double exact = exact_log_bf(p, y);
                const double oracle = d1 ? quadrature_log_bf_data1(y, 1, 1, 1, 1) : quadrature_log_bf_data3(y, 2, 2, 3);
                worst = std::max(worst, bf_scale_error(exact, oracle));
                antisymmetric &= exact_log_bf(q, y) == -exact;
            }
        }
    }
    const double secs = seconds_since(t0);
    return {worst < 1e-6 && antisymmetric && secs < 10.0,
            "max BF-scale error " + fmt("%.2e", worst) + (antisymmetric ? ", antisymmetry exact" : ", antisymmetry BROKEN") +
                ", " + fmt("%.1f s", secs)};
}

// 2. Backpropagation against central differences.
Outcome gradient_exactness() {
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0.0;
    std::size_t checked = 0, skipped = 0;
    for (ArchKind kind : {ArchKind::fnn, ArchKind::bnn, ArchKind::deepset}) {
        RngStream r = new_stream(202, static_cast<std::uint64_t>(kind));
        for (int rep = 0; rep < 20; ++rep) {
            const std::size_t dim = 2 + static_cast<std::size_t>(rep % 3);
            const GradCheck g = check_gradients(random_network(kind, dim, r), random_batch(8, dim, r));
            worst = std::max(worst, g.max_rel_error);
            checked += g.checked;
            skipped += g.skipped;
        }
    }
    const double secs = seconds_since(t0);
    return {worst < 1e-4 && skipped * 50 < checked && secs < 30.0,
            "max relative error " + fmt("%.2e", worst) + " over " + std::to_string(checked) + " coordinates (" +
                std::to_string(skipped) + " at kinks skipped), " + fmt("%.1f s", secs)};
}

// 3 and 4. Trained estimator at desk scale against the exact Bayes factor.
Outcome desk_scale(const std::string& pair_name, const std::vector<std::size_t>& ns) {
    const auto t0 = std::chrono::steady_clock::now();
    const ModelPair pair = make_builtin_pair(pair_name);
    const LogBfEvaluator exact = exact_evaluator(pair);
    Outcome out;
    for (std::size_t n : ns) {
        TrainConfig cfg;
        cfg.iterations = 40000;
        cfg.minibatch_per_model = 200;
        cfg.seed = 7;
        RngStream train_rng = new_stream(7, 1);
        const BfEstimator est = train(pair, n, cfg, train_rng);
        RngStream eval_rng = new_stream(7, 2);
        const EvalReport rep = evaluate(estimator_evaluator(est), &exact, pair, n, 1500, 512, eval_rng);
        const double rho = rep.get("spearman_rho");
        const double auc_gap = std::abs(rep.get("auc_estimated") - rep.get("auc_exact"));
        const double prior = rep.get("estimated_prior");
        const double sign = rep.get("sign_agreement");
        const bool ok = rho >= 0.9 && auc_gap <= 0.03 && prior >= 0.45 && prior <= 0.55 && sign >= 0.9;
        out.pass &= ok;
        if (!out.detail.empty()) out.detail += "; ";
        out.detail += "n=" + std::to_string(n) + " rho " + fmt("%.4f", rho) + ", AUC gap " + fmt("%.4f", auc_gap) +
                      ", prior " + fmt("%.4f", prior) + ", sign " + fmt("%.4f", sign) + " (" +
                      fmt("%.0f", rep.get("sign_unsigned_truths")) + " unsigned truths skipped)";
    }
    out.detail += ", " + fmt("%.0f s", seconds_since(t0));
    return out;
}

// 5. Partial, posterior and intrinsic Bayes factor identities.
Outcome variant_identities() {
    bool partial = true, posterior = true, equal_factors = true, ordering = true;
    RngStream r = new_stream(505, 0);
    {
        const BfEstimator full = random_estimator(4, Direction::m1_vs_m2, 8);
        const BfEstimator rev = random_estimator(2, Direction::m2_vs_m1, 9);
        const std::vector<std::size_t> split{1, 3};
        for (int i = 0; i < 100; ++i) {
            Data y(4);
            for (double& v : y) v = static_cast<double>(r.poisson(3));
            partial &= partial_bf(full, rev, y, split) == estimate_bf(full, y) * estimate_bf(rev, Data{y[1], y[3]});
        }
    }
    {
        const BfEstimator dbl = random_estimator(6, Direction::m1_vs_m2, 10);
        const BfEstimator rev = random_estimator(3, Direction::m2_vs_m1, 11);
        const std::vector<std::size_t> split{0, 1, 2};
        for (int i = 0; i < 100; ++i) {
            Data y(3);
            for (double& v : y) v = r.exponential(1.0);
            Data yy = y;
            yy.insert(yy.end(), y.begin(), y.end());
            posterior &= posterior_bf(dbl, rev, y) == partial_bf(dbl, rev, yy, split);
        }
    }
    for (int i = 0; i < 20; ++i) {
        const BfEstimator full = random_estimator(5, Direction::m1_vs_m2, 600 + i);
        const BfEstimator rev = constant_estimator(2, r.normal(0, 2), Direction::m2_vs_m1);
        Data y(5);
        for (double& v : y) v = static_cast<double>(r.poisson(4));
        RngStream a = new_stream(506, i), g = new_stream(506, i);
        const double ar = intrinsic_bf(full, rev, y, 2, IntrinsicMode::arithmetic, 100, a);
        const double ge = intrinsic_bf(full, rev, y, 2, IntrinsicMode::geometric, 100, g);
        equal_factors &= std::abs(ar - ge) <= 4 * std::numeric_limits<double>::epsilon() * ar;
    }
    for (int i = 0; i < 100; ++i) {
        const BfEstimator full = random_estimator(5, Direction::m1_vs_m2, 100 + i);
        const BfEstimator rev = random_estimator(2, Direction::m2_vs_m1, 300 + i);
        Data y(5);
        for (double& v : y) v = static_cast<double>(r.poisson(4));
        RngStream a = new_stream(507, i), g = new_stream(507, i);
        ordering &= intrinsic_bf(full, rev, y, 2, IntrinsicMode::geometric, 6, g) <=
                    intrinsic_bf(full, rev, y, 2, IntrinsicMode::arithmetic, 6, a);
    }
    auto word = [](bool b) { return b ? "ok" : "FAILED"; };
    return {partial && posterior && equal_factors && ordering,
            std::string("partial product ") + word(partial) + ", posterior = partial " + word(posterior) +
                ", equal factors " + word(equal_factors) + ", geometric <= arithmetic " + word(ordering)};
}

// 6. Stratified ABC against brute force, its range and a known value.
Outcome abc_checks() {
    Outcome out;
    std::size_t exact_instances = 0, mismatches = 0;
    {
        const ModelPair p = make_builtin_pair("data3");
        for (std::size_t keep : {20, 5}) {
            AbcConfig cfg;
            cfg.total_samples = 1000;
            cfg.strata = 10;
            cfg.per_stratum_keep = keep;
            cfg.final_keep = 50;
            const RngStream rng = new_stream(606, keep);
            const Reference ref = reference_table(p, 3, cfg, rng);
            RngStream qr = new_stream(607, keep);
            std::vector<Data> queries;
            for (int i = 0; i < 200; ++i) queries.push_back(simulate_dataset(i % 2 ? p.m1 : p.m2, 3, qr));
            RngStream run = rng;
            const auto res = abc_estimate_batch(p, queries, cfg, run);
            for (std::size_t i = 0; i < queries.size(); ++i) {
                const BruteForce bf = brute_force(ref, queries[i], cfg);
                if (res[i].exact != bf.strata_within_keep) ++mismatches;
                if (bf.strata_within_keep) {
                    ++exact_instances;
                    if (res[i].n1 != bf.n1 || res[i].n2 != bf.n2) ++mismatches;
                }
            }
        }
    }
    std::size_t out_of_range = 0;
    {
        const ModelPair p = make_builtin_pair("data1");
        AbcConfig cfg;
        cfg.total_samples = 20000;
        cfg.strata = 20;
        cfg.per_stratum_keep = 10;
        cfg.final_keep = 100;
        RngStream qr = new_stream(608, 0);
        std::vector<Data> queries;
        for (int i = 0; i < 1000; ++i) queries.push_back(simulate_dataset(i % 2 ? p.m1 : p.m2, 4, qr));
        RngStream rng = new_stream(608, 1);
        for (const AbcResult& r : abc_estimate_batch(p, queries, cfg, rng))
            if (r.estimate < 1.0 / 101.0 || r.estimate > 101.0) ++out_of_range;
    }
    double zeros = 0.0;
    {
        const ModelPair p = make_builtin_pair("data1");
        AbcConfig cfg;
        cfg.total_samples = 100000;
        cfg.strata = 100;
        cfg.per_stratum_keep = 10;
        cfg.final_keep = 100;
        const std::vector<Data> q{{0, 0}};
        RngStream rng = new_stream(609, 0);
        zeros = abc_estimate_batch(p, q, cfg, rng)[0].estimate / std::exp(exact_log_bf(p, q[0]));
    }
    out.pass = mismatches == 0 && exact_instances > 0 && out_of_range == 0 && zeros > 0.5 && zeros < 2.0;
    out.detail = std::to_string(exact_instances) + " exact instances, " + std::to_string(mismatches) +
                 " mismatches vs brute force; " + std::to_string(out_of_range) +
                 " of 1000 outside [1/(k+1), k+1]; y=(0,0) estimate/exact " + fmt("%.3f", zeros);
    return out;
}

// 7. Metric properties.
Outcome metric_properties() {
    const ModelPair p = make_builtin_pair("data3");
    const LogBfEvaluator exact = exact_evaluator(p);
    const std::vector<std::function<double(double)>> maps{
        [](double x) { return x; }, [](double x) { return 10 * x + 2; }, [](double x) { return std::exp(x); },
        [](double x) { return x * x * x; }};
    double worst_surprise = 0.0;
    for (const auto& f : maps) {
        const LogBfEvaluator est = [&](std::span<const Data> ys) {
            std::vector<double> v = exact(ys);
            for (double& x : v) x = f(x);
            return v;
        };
        RngStream r = new_stream(707, 0);
        worst_surprise = std::max(worst_surprise, mse_surprise(est, exact, p, 2, 1000, r));
    }

    RngStream r = new_stream(707, 1);
    const BfSampleSet s = simulate_sample_set(p, 2, 1000, exact, nullptr, r);
    bool auc_invariant = true;
    for (const auto& f : maps) {
        std::vector<double> a(s.est_m1), b(s.est_m2);
        for (double& x : a) x = f(x);
        for (double& x : b) x = f(x);
        auc_invariant &= auc(a, b) == auc(s.est_m1, s.est_m2);
    }

    std::vector<double> probes(s.est_m1);
    probes.insert(probes.end(), s.est_m2.begin(), s.est_m2.end());
    std::sort(probes.begin(), probes.end());
    bool p1_monotone = true;
    double prev = 1.0;
    for (double x : probes) {
        const double p1 = surprise(x, s.est_m1, s.est_m2).p1;
        p1_monotone &= p1 <= prev;
        prev = p1;
    }

    const Kde ka = make_kde(s.est_m1), kb = make_kde(s.est_m2);
    const Grid g = kde_grid(ka, kb, 2048);
    double ia = 0.0, ib = 0.0;
    for (std::size_t i = 0; i < g.count; ++i) {
        ia += ka(g.at(i));
        ib += kb(g.at(i));
    }
    const double kde_error = std::max(std::abs(ia * g.step() - 1), std::abs(ib * g.step() - 1));

    return {worst_surprise == 0.0 && auc_invariant && p1_monotone && kde_error < 1e-2,
            "max surprise MSE " + fmt("%.1e", worst_surprise) + (auc_invariant ? ", AUC invariant" : ", AUC varies") +
                (p1_monotone ? ", p1 monotone" : ", p1 not monotone") + ", KDE integral error " +
                fmt("%.1e", kde_error)};
}

// 8. Criticism on matched data and on a planted outlier.
Outcome criticism_checks() {
    const auto t0 = std::chrono::steady_clock::now();
    const ModelPair p = make_builtin_pair("data1");
    int matched = 0, outlier = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        RngStream sim = new_stream(seed, 801);
        const Data y = simulate_dataset(p.m2, 128, sim);
        RngStream a = new_stream(seed, 802);
        matched += criticize(p.m2, y, 1000, a).contains_half ? 1 : 0;
        RngStream b = new_stream(seed, 803);
        outlier += criticize(p.m2, Data(128, 18.0), 1000, b).contains_half ? 0 : 1;
    }
    return {matched >= 8 && outlier >= 9, "matched data contain 0.5 on " + std::to_string(matched) +
                                              "/10 seeds, outlier excludes 0.5 on " + std::to_string(outlier) +
                                              "/10, " + fmt("%.0f s", seconds_since(t0))};
}

// 9. Byte-identical reruns through the command-line front end.
Outcome determinism() {
    const fs::path dir = fs::temp_directory_path() / "deepbf_acceptance";
    fs::remove_all(dir);
    fs::create_directories(dir);
    auto write = [&](const std::string& name, const std::string& body) {
        std::ofstream((dir / name).string()) << body;
        return (dir / name).string();
    };
    auto read = [&](const std::string& name) {
        std::ifstream in((dir / name).string());
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    };
    auto run = [](std::vector<std::string> args) {
        args.insert(args.begin(), "deepbf");
        return cli::run_command(args);
    };
    const std::string cfg = write("cfg.json", R"({
      "pair": {"name": "data1"}, "n": 2, "seed": 11,
      "train": {"iterations": 2000},
      "abc": {"total_samples": 100000, "strata": 100, "per_stratum_keep": 10, "final_keep": 100}
    })");
    const std::string data = write("data.csv", "y1,y2\n0,0\n1,4\n9,2\n");
    bool ok = true;
    for (const char* out : {"a.json", "b.json"})
        ok &= run({"train", "--config", cfg, "--out", (dir / out).string()}) == cli::kOk;
    for (const char* out : {"a.csv", "b.csv"})
        ok &= run({"abc", "--config", cfg, "--data", data, "--out", (dir / out).string()}) == cli::kOk;
    const bool train_same = ok && !read("a.json").empty() && read("a.json") == read("b.json");
    const bool abc_same = ok && !read("a.csv").empty() && read("a.csv") == read("b.csv");
    fs::remove_all(dir);
    return {train_same && abc_same, std::string("train ") + (train_same ? "identical" : "DIFFERS") + ", abc " +
                                        (abc_same ? "identical" : "DIFFERS")};
}

// 10. Tree cell probabilities against independently written expressions.
Outcome mpt_correctness() {
    RngStream r = new_stream(1010, 0);
    double worst = 0.0;
    bool neutral_equal = true;
    for (int i = 0; i < 10000; ++i) {
        const double A = r.uniform01(), B = r.uniform01(), C = r.uniform01();
        const double pd[6] = {C + (1 - C) * (A + (1 - A) * B),
                              C + (1 - C) * (1 - A) * (1 - B),
                              C + (1 - C) * (1 - A) * B,
                              C + (1 - C) * (A + (1 - A) * (1 - B)),
                              C + (1 - C) * B,
                              C + (1 - C) * (1 - B)};
        const double st[6] = {A + (1 - A) * (C + (1 - C) * B),
                              (1 - A) * (C + (1 - C) * (1 - B)),
                              (1 - A) * (C + (1 - C) * B),
                              A + (1 - A) * (C + (1 - C) * (1 - B)),
                              C + (1 - C) * B,
                              C + (1 - C) * (1 - B)};
        const auto got_pd = mpt_cell_probabilities(MptTree::process_dissociation, A, B, C);
        const auto got_st = mpt_cell_probabilities(MptTree::stroop, A, B, C);
        for (int j = 0; j < 6; ++j) {
            worst = std::max(worst, std::abs(got_pd[j] - pd[j]));
            worst = std::max(worst, std::abs(got_st[j] - st[j]));
        }
        neutral_equal &= got_pd[4] == got_st[4] && got_pd[5] == got_st[5];
    }
    return {worst < 1e-15 && neutral_equal, "max absolute difference " + fmt("%.1e", worst) +
                                                (neutral_equal ? ", Neutral cells equal" : ", Neutral cells differ")};
}

} // namespace

int main() {
    struct Criterion {
        const char* name;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria{
        {"oracle correctness", oracle_correctness},
        {"gradient exactness", gradient_exactness},
        {"desk-scale data1 n=2", [] { return desk_scale("data1", {2}); }},
        {"desk-scale data3 n=2,8", [] { return desk_scale("data3", {2, 8}); }},
        {"variant identities", variant_identities},
        {"stratified ABC", abc_checks},
        {"metric properties", metric_properties},
        {"criticism", criticism_checks},
        {"determinism", determinism},
        {"MPT cell probabilities", mpt_correctness},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += o.pass ? 0 : 1;
        std::cout << (o.pass ? "PASS" : "FAIL") << " [" << i + 1 << "] " << criteria[i].name << ": " << o.detail
                  << std::endl;
    }
    std::cout << criteria.size() - failed << "/" << criteria.size() << " criteria passed" << std::endl;
    return failed == 0 ? 0 : 1;
}
