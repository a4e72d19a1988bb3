#pragma once

// JSON checkpoints. Doubles are stored as hex-float strings so a save/load
// round trip is bitwise exact.

#include <cstdint>
#include <string>
#include <string_view>

#include <json.hpp>

#include "deepbf/estimator.hpp"
#include "deepbf/nn.hpp"

namespace deepbf {

using Json = nlohmann::ordered_json;

std::string encode_double(double v);
/// Accepts the hex-float strings written by encode_double plus plain JSON
/// numbers. Throws ConfigError on malformed input.
double decode_double(const Json& j);

Json to_json(const ArchSpec& arch);
ArchSpec arch_from_json(const Json& j);

Json to_json(const AdamConfig& c);
AdamConfig adam_config_from_json(const Json& j);

/// Canonical form of a training configuration; its hash identifies the run.
Json to_json(const TrainConfig& cfg);

Json to_json(const Network& net, const AdamState* adam = nullptr);
/// Reads a network, and its optimizer state when `adam` is non-null.
Network network_from_json(const Json& j, AdamState* adam = nullptr);

Json to_json(const BfEstimator& est);
BfEstimator estimator_from_json(const Json& j);

std::string save_estimator(const BfEstimator& est);
BfEstimator load_estimator(std::string_view text);

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes);
/// FNV-1a of the compact dump of j.
std::uint64_t config_hash(const Json& j);
std::string hash_hex(std::uint64_t h);

} // namespace deepbf
