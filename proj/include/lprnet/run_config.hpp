#pragma once

#include <string>

#include "lprnet/network.hpp"
#include "lprnet/registration.hpp"
#include "lprnet/simdata.hpp"
#include "lprnet/training.hpp"

namespace lprnet {

// One JSON document configuring the whole pipeline.  Four optional object
// sections -- "network", "training", "registration", "simulation" -- each
// mirroring the corresponding struct field for field.  Every key is
// optional and defaults to the struct's default; unknown keys are rejected
// with the offending key named, and type mismatches name the key and the
// expected type.
struct RunConfig {
    NetworkConfig network;
    TrainConfig training;
    ICLKConfig registration;
    SimPairSpec simulation;
};

// Parses JSON text.  Throws std::invalid_argument naming the offending key
// on unknown keys or type mismatches, including malformed JSON.
RunConfig parse_run_config(const std::string& json_text);

// Reads and parses a config file.  Throws IoError when unreadable.
RunConfig load_run_config(const std::string& path);

// Serializes every field (the documented defaults are what a
// default-constructed RunConfig prints).  parse(run_config_json(c)) == c.
std::string run_config_json(const RunConfig& config);

// Enum spellings used in the JSON: "pos" | "feat" | "both".
std::string embedding_name(Embedding e);
// "mlp" | "attn"
std::string integrator_name(Integrator i);

}  // namespace lprnet
