#pragma once

#include "lprnet/autodiff.hpp"
#include "lprnet/cloud.hpp"
#include "lprnet/rng.hpp"
#include "lprnet/sampling.hpp"

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace lprnet {

// What goes into each patch token: the position embedding of the patch
// center, the pooled feature embedding of its points, or their sum.
enum class Embedding { kPositionOnly, kFeatureOnly, kBoth };

// How tokens exchange information: pre-norm transformer blocks, or a
// shared-weight perceptron where each token is mixed with the max-pooled
// batch context (no attention).
enum class Integrator { kTransformer, kSharedMLP };

struct NetworkConfig {
    int embed_dim = 64;
    int encoder_depth = 4;
    int decoder_depth = 2;
    int hidden_dim = 48;
    int heads = 6;
    int mlp_ratio = 4;
    int patch_size = 32;   // k points per patch
    int num_patches = 64;  // M patches
    double mask_ratio = 0.6;
    std::vector<double> level_fractions = {1.0, 0.5, 0.25};
    Embedding embedding = Embedding::kBoth;
    Integrator integrator = Integrator::kTransformer;

    static NetworkConfig desk_scale() { return {}; }

    static NetworkConfig paper_scale() {
        NetworkConfig c;
        c.embed_dim = 512;
        c.encoder_depth = 8;
        c.decoder_depth = 4;
        c.hidden_dim = 384;
        c.heads = 6;
        c.mlp_ratio = 4;
        c.patch_size = 32;
        c.num_patches = 64;
        return c;
    }

    void validate() const;
};

// Per-patch tokens (FE + PE sums) with their visibility and centers.
template <typename T>
struct TokenBatch {
    std::vector<T> tokens;  // num_patches x embed_dim, row-major
    std::vector<std::uint8_t> visible;
    std::vector<Vec3> centers;
    int num_patches = 0;
    int embed_dim = 0;
};

template <typename T>
struct Model {
    NetworkConfig config;
    std::vector<ad::Param<T>> params;
    std::unordered_map<std::string, int> index;

    const ad::Param<T>& param(const std::string& name) const {
        const auto it = index.find(name);
        if (it == index.end()) throw std::invalid_argument("unknown parameter: " + name);
        return params[std::size_t(it->second)];
    }
};

// Parameter node ids of one model on one tape.
template <typename T>
struct BoundModel {
    const Model<T>* model = nullptr;
    std::vector<int> ids;

    int id(const std::string& name) const {
        const auto it = model->index.find(name);
        if (it == model->index.end()) throw std::invalid_argument("unknown parameter: " + name);
        return ids[std::size_t(it->second)];
    }
};

// Seeded parameter initialization.  Point-feature parameters are created
// only when cfg.embedding uses them; position parameters always exist (the
// decoder needs them).  Shared-MLP blocks replace the attention parameters
// when cfg.integrator is kSharedMLP.
template <typename T>
Model<T> init_model(const NetworkConfig& cfg, std::uint64_t seed);

template <typename T>
BoundModel<T> bind_model(ad::Tape<T>& tape, const Model<T>& model, bool requires_grad);

// --- tape-level forward pieces (compose on one tape for training) ---

// FE for all patches: local_points flattened to [M*k x 3]; two shared
// per-point layers, per-patch max-pool of both, skip concat -> [M x embed].
template <typename T>
int fe_node(ad::Tape<T>& tape, const BoundModel<T>& bm, int local_points, int num_patches);

// PE for all centers: [M x 3] -> [M x embed]
template <typename T>
int pe_node(ad::Tape<T>& tape, const BoundModel<T>& bm, int centers);

// visible tokens -> input projection -> encoder blocks -> final norm
template <typename T>
int encode_node(ad::Tape<T>& tape, const BoundModel<T>& bm, int tokens,
                const std::vector<int>& visible_idx);

// decoder over (encoded visible + mask-token copies), each slot plus its
// projected PE; prediction head over the masked slots -> [Mmask*k x 3]
template <typename T>
int decode_predict_node(ad::Tape<T>& tape, const BoundModel<T>& bm, int encoded, int pe_all,
                        const std::vector<int>& visible_idx, const std::vector<int>& masked_idx);

// the whole masked-autoencoding pass: grouped chamfer loss over masked patches
template <typename T>
int reconstruction_loss_node(ad::Tape<T>& tape, const BoundModel<T>& bm, const PatchSet& patches);

// --- public ops ---

// Requires a model whose embedding mode includes point features.
template <typename T>
std::vector<T> feature_embed(const Model<T>& model, const std::vector<Vec3>& local_points);

template <typename T>
std::vector<T> position_embed(const Model<T>& model, const Vec3& center);

template <typename T>
TokenBatch<T> make_tokens(const Model<T>& model, const PatchSet& patches);

// encoded features of the visible tokens, row-major [num visible x hidden]
template <typename T>
std::vector<T> encode(const Model<T>& model, const TokenBatch<T>& batch);

// predicted masked patches, center-relative, in masked-slot order
template <typename T>
std::vector<std::vector<Vec3>> decode_and_predict(const Model<T>& model,
                                                  const TokenBatch<T>& batch);

// untracked reconstruction loss of one patch set (forward only)
template <typename T>
double reconstruction_loss(const Model<T>& model, const PatchSet& patches);

// Symmetric chamfer distance between two plain point sets: mean squared
// nearest-neighbor distance summed over both directions.
double chamfer_l2(const std::vector<Vec3>& a, const std::vector<Vec3>& b);

inline constexpr std::uint64_t kDefaultPatchSeed = 0x70617463ull;  // frozen per evaluation

// The registration feature map F(P): patches without masking, encode, then
// max-pool the encoded tokens into one hidden_dim vector.
template <typename T>
std::vector<T> global_feature(const Model<T>& model, const PointCloud& cloud,
                              std::uint64_t patch_seed = kDefaultPatchSeed);

// checkpoint glue
template <typename T>
std::vector<struct CheckpointRecord> model_records(const Model<T>& model);

template <typename T>
void load_model_params(Model<T>& model, const std::vector<struct CheckpointRecord>& records);

}  // namespace lprnet
