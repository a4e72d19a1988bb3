#include "deepbf/checkpoint.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>

#include "deepbf/error.hpp"
#include "deepbf/kernels.hpp"

namespace deepbf {

namespace {

constexpr const char* kFormat = "deepbf-checkpoint";
constexpr int kFormatVersion = 1;

Json encode_array(const std::vector<double>& v) {
    Json a = Json::array();
    for (double x : v) a.push_back(encode_double(x));
    return a;
}

std::vector<double> decode_array(const Json& j, const char* what) {
    if (!j.is_array()) throw ConfigError(std::string(what) + " must be an array");
    std::vector<double> out;
    out.reserve(j.size());
    for (const Json& e : j) out.push_back(decode_double(e));
    return out;
}

const Json& field(const Json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end()) throw ConfigError(std::string("checkpoint is missing '") + key + "'");
    return *it;
}

template <class T>
T get(const Json& j, const char* key) {
    try {
        return field(j, key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("checkpoint field '") + key + "': " + e.what());
    }
}

} // namespace

std::string encode_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::hex);
    return std::string(buf, res.ptr);
}

double decode_double(const Json& j) {
    if (j.is_number()) return j.get<double>();
    if (!j.is_string()) throw ConfigError("expected a hex-float string or a number");
    const std::string s = j.get<std::string>();
    if (s == "inf") return HUGE_VAL;
    if (s == "-inf") return -HUGE_VAL;
    if (s == "nan") return std::nan("");
    double v = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    const bool neg = first != last && *first == '-';
    if (neg) ++first;
    const auto res = std::from_chars(first, last, v, std::chars_format::hex);
    if (res.ec != std::errc{} || res.ptr != last) throw ConfigError("malformed hex-float '" + s + "'");
    return neg ? -v : v;
}

Json to_json(const ArchSpec& a) {
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

ArchSpec arch_from_json(const Json& j) {
    ArchSpec a;
    a.kind = parse_arch_kind(get<std::string>(j, "kind"));
    a.width = get<std::size_t>(j, "width");
    a.depth = get<std::size_t>(j, "depth");
    a.first_width = get<std::size_t>(j, "first_width");
    a.reduction_ratio = get<double>(j, "reduction_ratio");
    a.min_width = get<std::size_t>(j, "min_width");
    a.q = get<std::size_t>(j, "q");
    a.inner_widths = get<std::vector<std::size_t>>(j, "inner_widths");
    return a;
}

Json to_json(const AdamConfig& c) {
    Json j;
    j["lr"] = c.lr;
    j["beta1"] = c.beta1;
    j["beta2"] = c.beta2;
    j["epsilon"] = c.epsilon;
    j["decay"] = c.decay;
    j["decay_every"] = c.decay_every;
    return j;
}

AdamConfig adam_config_from_json(const Json& j) {
    AdamConfig c;
    c.lr = get<double>(j, "lr");
    c.beta1 = get<double>(j, "beta1");
    c.beta2 = get<double>(j, "beta2");
    c.epsilon = get<double>(j, "epsilon");
    c.decay = get<double>(j, "decay");
    c.decay_every = get<std::uint64_t>(j, "decay_every");
    return c;
}

Json to_json(const TrainConfig& cfg) {
    Json j;
    j["iterations"] = cfg.iterations;
    j["minibatch_per_model"] = cfg.minibatch_per_model;
    j["arch"] = to_json(cfg.arch);
    j["adam"] = to_json(cfg.adam);
    j["seed"] = cfg.seed;
    j["eval_reference_batch"] = cfg.eval_reference_batch;
    j["direction"] = to_string(cfg.direction);
    j["eps"] = encode_double(cfg.eps);
    return j;
}

Json to_json(const Network& net, const AdamState* adam) {
    Json j;
    j["arch"] = to_json(net.arch);
    j["input_dim"] = net.input_dim;
    Json layers = Json::array();
    for (const Layer& l : net.layers) {
        Json lj;
        lj["kind"] = to_string(l.kind);
        lj["in"] = l.in;
        lj["out"] = l.out;
        lj["param_offset"] = l.param_offset;
        lj["buffer_offset"] = l.buffer_offset;
        lj["group"] = l.group;
        layers.push_back(std::move(lj));
    }
    j["layers"] = std::move(layers);
    j["params"] = encode_array(net.params);
    j["buffers"] = encode_array(net.buffers);
    if (adam != nullptr) {
        Json a;
        a["config"] = to_json(adam->config);
        a["t"] = adam->t;
        a["m"] = encode_array(adam->m);
        a["v"] = encode_array(adam->v);
        j["adam"] = std::move(a);
    }
    return j;
}

Network network_from_json(const Json& j, AdamState* adam) {
    const ArchSpec arch = arch_from_json(field(j, "arch"));
    const auto input_dim = get<std::size_t>(j, "input_dim");
    // The layout is rebuilt from the architecture and checked against the
    // stored one, so a checkpoint cannot describe an inconsistent network.
    RngStream scratch(0, 0);
    Network net = build_network(arch, input_dim, scratch);
    const Json& layers = field(j, "layers");
    if (!layers.is_array() || layers.size() != net.layers.size())
        throw ConfigError("checkpoint layer list does not match its architecture");
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        const Layer& l = net.layers[i];
        const Json& lj = layers[i];
        if (get<std::string>(lj, "kind") != to_string(l.kind) || get<std::size_t>(lj, "in") != l.in ||
            get<std::size_t>(lj, "out") != l.out || get<std::size_t>(lj, "param_offset") != l.param_offset ||
            get<std::size_t>(lj, "buffer_offset") != l.buffer_offset || get<std::size_t>(lj, "group") != l.group)
            throw ConfigError("checkpoint layer " + std::to_string(i) + " does not match its architecture");
    }
    std::vector<double> params = decode_array(field(j, "params"), "params");
    std::vector<double> buffers = decode_array(field(j, "buffers"), "buffers");
    if (params.size() != net.params.size() || buffers.size() != net.buffers.size())
        throw ConfigError("checkpoint parameter count does not match its architecture");
    net.params = std::move(params);
    net.buffers = std::move(buffers);
    if (adam != nullptr) {
        const Json& a = field(j, "adam");
        *adam = make_adam_state(net, adam_config_from_json(field(a, "config")));
        adam->t = get<std::uint64_t>(a, "t");
        adam->m = decode_array(field(a, "m"), "adam.m");
        adam->v = decode_array(field(a, "v"), "adam.v");
        if (adam->m.size() != net.params.size() || adam->v.size() != net.params.size())
            throw ConfigError("checkpoint optimizer state does not match the network");
    }
    return net;
}

Json to_json(const BfEstimator& est) {
    Json j;
    j["format"] = kFormat;
    j["version"] = kFormatVersion;
    j["artifact_version"] = DEEPBF_VERSION;
    j["kernels"] = kernels::active().name;
    Json pair;
    pair["name"] = est.pair_name;
    Json hp = Json::object();
    for (const auto& [k, v] : est.hyperparams) hp[k] = v;
    pair["hyperparams"] = std::move(hp);
    pair["prior_m1"] = est.prior_m1;
    j["pair"] = std::move(pair);
    j["n"] = est.n;
    j["direction"] = to_string(est.direction);
    j["eps"] = encode_double(est.eps);
    j["seed"] = est.seed;
    j["train_config_hash"] = hash_hex(est.train_config_hash);
    j["network"] = to_json(est.net, &est.adam);
    j["eval_reference_batch"] = est.reference.rows;
    j["reference"] = encode_array(est.reference.data);
    return j;
}

BfEstimator estimator_from_json(const Json& j) {
    if (!j.is_object() || get<std::string>(j, "format") != kFormat) throw ConfigError("not a deepbf checkpoint");
    if (get<int>(j, "version") != kFormatVersion) throw ConfigError("unsupported checkpoint version");
    BfEstimator est;
    const Json& pair = field(j, "pair");
    est.pair_name = get<std::string>(pair, "name");
    for (const auto& [k, v] : field(pair, "hyperparams").items()) est.hyperparams[k] = v.get<double>();
    est.prior_m1 = get<double>(pair, "prior_m1");
    est.n = get<std::size_t>(j, "n");
    try {
        est.direction = parse_direction(get<std::string>(j, "direction"));
    } catch (const InvalidParameter& e) {
        throw ConfigError(e.what());
    }
    est.eps = decode_double(field(j, "eps"));
    est.seed = get<std::uint64_t>(j, "seed");
    const std::string h = get<std::string>(j, "train_config_hash");
    est.train_config_hash = std::stoull(h, nullptr, 16);
    est.net = network_from_json(field(j, "network"), &est.adam);
    if (est.net.input_dim != est.n) throw ConfigError("checkpoint n does not match the network input");
    const auto rows = get<std::size_t>(j, "eval_reference_batch");
    est.reference = Matrix(rows, est.n);
    est.reference.data = decode_array(field(j, "reference"), "reference");
    if (est.reference.data.size() != rows * est.n) throw ConfigError("checkpoint reference batch has the wrong size");
    return est;
}

std::string save_estimator(const BfEstimator& est) { return to_json(est).dump(1) + "\n"; }

BfEstimator load_estimator(std::string_view text) {
    Json j;
    try {
        j = Json::parse(text.begin(), text.end());
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("checkpoint is not valid JSON: ") + e.what());
    }
    return estimator_from_json(j);
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t config_hash(const Json& j) { return fnv1a64(j.dump()); }

std::string hash_hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace deepbf
