#include "lprnet/run_config.hpp"

#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include <json.hpp>

#include "lprnet/errors.hpp"

namespace lprnet {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& key, const std::string& expected) {
    throw std::invalid_argument("config: key \"" + key + "\" expects " + expected);
}

int as_int(const json& v, const std::string& key) {
    if (!v.is_number_integer()) fail(key, "an integer");
    return v.get<int>();
}

double as_double(const json& v, const std::string& key) {
    if (!v.is_number()) fail(key, "a number");
    return v.get<double>();
}

bool as_bool(const json& v, const std::string& key) {
    if (!v.is_boolean()) fail(key, "a boolean");
    return v.get<bool>();
}

std::string as_string(const json& v, const std::string& key) {
    if (!v.is_string()) fail(key, "a string");
    return v.get<std::string>();
}

std::uint64_t as_seed(const json& v, const std::string& key) {
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() &&
                                   v.get<long long>() < 0)) {
        fail(key, "a non-negative integer");
    }
    return v.get<std::uint64_t>();
}

std::vector<double> as_doubles(const json& v, const std::string& key) {
    if (!v.is_array()) fail(key, "an array of numbers");
    std::vector<double> out;
    for (const json& item : v) {
        if (!item.is_number()) fail(key, "an array of numbers");
        out.push_back(item.get<double>());
    }
    return out;
}

std::vector<std::string> as_strings(const json& v, const std::string& key) {
    if (!v.is_array()) fail(key, "an array of strings");
    std::vector<std::string> out;
    for (const json& item : v) {
        if (!item.is_string()) fail(key, "an array of strings");
        out.push_back(item.get<std::string>());
    }
    return out;
}

Embedding as_embedding(const json& v, const std::string& key) {
    const std::string s = as_string(v, key);
    if (s == "pos") return Embedding::kPositionOnly;
    if (s == "feat") return Embedding::kFeatureOnly;
    if (s == "both") return Embedding::kBoth;
    fail(key, "one of \"pos\", \"feat\", \"both\"");
}

Integrator as_integrator(const json& v, const std::string& key) {
    const std::string s = as_string(v, key);
    if (s == "mlp") return Integrator::kSharedMLP;
    if (s == "attn") return Integrator::kTransformer;
    fail(key, "one of \"mlp\", \"attn\"");
}

// Applies every key of `section` through the per-key setters; any key
// without a setter is unknown and rejected.
void apply_section(const json& section, const std::string& name,
                   const std::unordered_map<std::string, std::function<void(const json&)>>& keys) {
    if (!section.is_object()) fail(name, "an object");
    for (const auto& [key, value] : section.items()) {
        const auto it = keys.find(key);
        if (it == keys.end())
            throw std::invalid_argument("config: unknown key \"" + name + "." + key + "\"");
        it->second(value);
    }
}

void apply_network(const json& s, NetworkConfig& c) {
    const std::string p = "network.";
    apply_section(
        s, "network",
        {{"embed_dim", [&](const json& v) { c.embed_dim = as_int(v, p + "embed_dim"); }},
         {"encoder_depth",
          [&](const json& v) { c.encoder_depth = as_int(v, p + "encoder_depth"); }},
         {"decoder_depth",
          [&](const json& v) { c.decoder_depth = as_int(v, p + "decoder_depth"); }},
         {"hidden_dim", [&](const json& v) { c.hidden_dim = as_int(v, p + "hidden_dim"); }},
         {"heads", [&](const json& v) { c.heads = as_int(v, p + "heads"); }},
         {"mlp_ratio", [&](const json& v) { c.mlp_ratio = as_int(v, p + "mlp_ratio"); }},
         {"patch_size", [&](const json& v) { c.patch_size = as_int(v, p + "patch_size"); }},
         {"num_patches", [&](const json& v) { c.num_patches = as_int(v, p + "num_patches"); }},
         {"mask_ratio", [&](const json& v) { c.mask_ratio = as_double(v, p + "mask_ratio"); }},
         {"level_fractions",
          [&](const json& v) { c.level_fractions = as_doubles(v, p + "level_fractions"); }},
         {"embedding", [&](const json& v) { c.embedding = as_embedding(v, p + "embedding"); }},
         {"integrator",
          [&](const json& v) { c.integrator = as_integrator(v, p + "integrator"); }}});
}

void apply_training(const json& s, TrainConfig& c) {
    const std::string p = "training.";
    apply_section(
        s, "training",
        {{"epochs", [&](const json& v) { c.epochs = as_int(v, p + "epochs"); }},
         {"batch_size", [&](const json& v) { c.batch_size = as_int(v, p + "batch_size"); }},
         {"base_lr", [&](const json& v) { c.base_lr = as_double(v, p + "base_lr"); }},
         {"weight_decay",
          [&](const json& v) { c.weight_decay = as_double(v, p + "weight_decay"); }},
         {"seed", [&](const json& v) { c.seed = as_seed(v, p + "seed"); }},
         {"desk_scale", [&](const json& v) { c.desk_scale = as_bool(v, p + "desk_scale"); }},
         {"full_so3_augment",
          [&](const json& v) { c.full_so3_augment = as_bool(v, p + "full_so3_augment"); }},
         {"dataset", [&](const json& v) { c.dataset = as_strings(v, p + "dataset"); }},
         {"log_path", [&](const json& v) { c.log_path = as_string(v, p + "log_path"); }},
         {"checkpoint_path",
          [&](const json& v) { c.checkpoint_path = as_string(v, p + "checkpoint_path"); }},
         {"checkpoint_every",
          [&](const json& v) { c.checkpoint_every = as_int(v, p + "checkpoint_every"); }},
         {"resume_path",
          [&](const json& v) { c.resume_path = as_string(v, p + "resume_path"); }},
         {"stop_after_epochs",
          [&](const json& v) { c.stop_after_epochs = as_int(v, p + "stop_after_epochs"); }}});
}

void apply_registration(const json& s, ICLKConfig& c) {
    const std::string p = "registration.";
    apply_section(
        s, "registration",
        {{"step", [&](const json& v) { c.step = as_double(v, p + "step"); }},
         {"max_iterations",
          [&](const json& v) { c.max_iterations = as_int(v, p + "max_iterations"); }},
         {"tolerance", [&](const json& v) { c.tolerance = as_double(v, p + "tolerance"); }},
         {"svd_cutoff", [&](const json& v) { c.svd_cutoff = as_double(v, p + "svd_cutoff"); }},
         {"central_differences",
          [&](const json& v) { c.central_differences = as_bool(v, p + "central_differences"); }}});
}

void apply_simulation(const json& s, SimPairSpec& c) {
    const std::string p = "simulation.";
    apply_section(
        s, "simulation",
        {{"noise_sigma", [&](const json& v) { c.noise_sigma = as_double(v, p + "noise_sigma"); }},
         {"occlusion_rate",
          [&](const json& v) { c.occlusion_rate = as_double(v, p + "occlusion_rate"); }},
         {"rot_max_deg", [&](const json& v) { c.rot_max_deg = as_double(v, p + "rot_max_deg"); }},
         {"trans_max", [&](const json& v) { c.trans_max = as_double(v, p + "trans_max"); }},
         {"contiguous_occlusion",
          [&](const json& v) { c.contiguous_occlusion = as_bool(v, p + "contiguous_occlusion"); }},
         {"vertical_axis_only",
          [&](const json& v) { c.vertical_axis_only = as_bool(v, p + "vertical_axis_only"); }},
         {"seed", [&](const json& v) { c.seed = as_seed(v, p + "seed"); }}});
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::exception& ex) {
        throw std::invalid_argument(std::string("config: malformed JSON: ") + ex.what());
    }
    if (!doc.is_object()) throw std::invalid_argument("config: top level must be an object");
    RunConfig cfg;
    for (const auto& [key, value] : doc.items()) {
        if (key == "network") {
            apply_network(value, cfg.network);
        } else if (key == "training") {
            apply_training(value, cfg.training);
        } else if (key == "registration") {
            apply_registration(value, cfg.registration);
        } else if (key == "simulation") {
            apply_simulation(value, cfg.simulation);
        } else {
            throw std::invalid_argument("config: unknown key \"" + key + "\"");
        }
    }
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open config: " + path);
    std::ostringstream text;
    text << in.rdbuf();
    return parse_run_config(text.str());
}

std::string embedding_name(Embedding e) {
    switch (e) {
        case Embedding::kPositionOnly:
            return "pos";
        case Embedding::kFeatureOnly:
            return "feat";
        case Embedding::kBoth:
        default:
            return "both";
    }
}

std::string integrator_name(Integrator i) {
    return i == Integrator::kSharedMLP ? "mlp" : "attn";
}

std::string run_config_json(const RunConfig& config) {
    const json doc = {
        {"network",
         {{"embed_dim", config.network.embed_dim},
          {"encoder_depth", config.network.encoder_depth},
          {"decoder_depth", config.network.decoder_depth},
          {"hidden_dim", config.network.hidden_dim},
          {"heads", config.network.heads},
          {"mlp_ratio", config.network.mlp_ratio},
          {"patch_size", config.network.patch_size},
          {"num_patches", config.network.num_patches},
          {"mask_ratio", config.network.mask_ratio},
          {"level_fractions", config.network.level_fractions},
          {"embedding", embedding_name(config.network.embedding)},
          {"integrator", integrator_name(config.network.integrator)}}},
        {"training",
         {{"epochs", config.training.epochs},
          {"batch_size", config.training.batch_size},
          {"base_lr", config.training.base_lr},
          {"weight_decay", config.training.weight_decay},
          {"seed", config.training.seed},
          {"desk_scale", config.training.desk_scale},
          {"full_so3_augment", config.training.full_so3_augment},
          {"dataset", config.training.dataset},
          {"log_path", config.training.log_path},
          {"checkpoint_path", config.training.checkpoint_path},
          {"checkpoint_every", config.training.checkpoint_every},
          {"resume_path", config.training.resume_path},
          {"stop_after_epochs", config.training.stop_after_epochs}}},
        {"registration",
         {{"step", config.registration.step},
          {"max_iterations", config.registration.max_iterations},
          {"tolerance", config.registration.tolerance},
          {"svd_cutoff", config.registration.svd_cutoff},
          {"central_differences", config.registration.central_differences}}},
        {"simulation",
         {{"noise_sigma", config.simulation.noise_sigma},
          {"occlusion_rate", config.simulation.occlusion_rate},
          {"rot_max_deg", config.simulation.rot_max_deg},
          {"trans_max", config.simulation.trans_max},
          {"contiguous_occlusion", config.simulation.contiguous_occlusion},
          {"vertical_axis_only", config.simulation.vertical_axis_only},
          {"seed", config.simulation.seed}}}};
    return doc.dump(2) + "\n";
}

}  // namespace lprnet
