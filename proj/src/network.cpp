#include "lprnet/network.hpp"

#include "lprnet/checkpoint.hpp"
#include "lprnet/errors.hpp"
#include "lprnet/kdtree.hpp"
#include "lprnet/kernels.hpp"

#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace lprnet {

void NetworkConfig::validate() const {
    if (embed_dim <= 0 || hidden_dim <= 0 || heads <= 0 || mlp_ratio <= 0 ||
        encoder_depth <= 0 || decoder_depth <= 0 || patch_size <= 0 || num_patches <= 0) {
        throw std::invalid_argument("network config: all dimensions must be positive");
    }
    if (embed_dim % 2 != 0) {
        throw std::invalid_argument("network config: embed_dim must be even (skip concat halves)");
    }
    if (hidden_dim % heads != 0) {
        throw std::invalid_argument("network config: hidden_dim must be divisible by heads");
    }
    if (mask_ratio < 0.0 || mask_ratio >= 1.0) {
        throw std::invalid_argument("network config: mask_ratio must be in [0, 1)");
    }
    if (level_fractions.empty()) {
        throw std::invalid_argument("network config: level_fractions must be non-empty");
    }
}

namespace {

template <typename T>
void add_param(Model<T>& m, rng::Engine& e, const std::string& name, int rows, int cols,
               char kind) {
    ad::Param<T> p;
    p.name = name;
    p.shape = ad::Shape{rows, cols};
    p.value.resize(std::size_t(rows) * std::size_t(cols));
    switch (kind) {
        case 'w': {  // Xavier-uniform
            const double lim = std::sqrt(6.0 / double(rows + cols));
            for (auto& v : p.value) v = T(rng::uniform(e, -lim, lim));
            break;
        }
        case 'n': {  // small normal (mask token)
            for (auto& v : p.value) v = T(0.02 * rng::normal(e));
            break;
        }
        case '1':
            for (auto& v : p.value) v = T(1);
            break;
        case '0':
        default:
            for (auto& v : p.value) v = T(0);
            break;
    }
    m.index.emplace(name, int(m.params.size()));
    m.params.push_back(std::move(p));
}

template <typename T>
void add_block_params(Model<T>& m, rng::Engine& e, const std::string& prefix,
                      const NetworkConfig& c) {
    const int h = c.hidden_dim;
    const int mh = c.hidden_dim * c.mlp_ratio;
    if (c.integrator == Integrator::kSharedMLP) {
        add_param(m, e, prefix + ".smlp.w", 2 * h, h, 'w');
        add_param(m, e, prefix + ".smlp.b", 1, h, '0');
        return;
    }
    add_param(m, e, prefix + ".ln1.g", 1, h, '1');
    add_param(m, e, prefix + ".ln1.b", 1, h, '0');
    add_param(m, e, prefix + ".attn.wq", h, h, 'w');
    add_param(m, e, prefix + ".attn.bq", 1, h, '0');
    add_param(m, e, prefix + ".attn.wk", h, h, 'w');
    add_param(m, e, prefix + ".attn.bk", 1, h, '0');
    add_param(m, e, prefix + ".attn.wv", h, h, 'w');
    add_param(m, e, prefix + ".attn.bv", 1, h, '0');
    add_param(m, e, prefix + ".attn.wo", h, h, 'w');
    add_param(m, e, prefix + ".attn.bo", 1, h, '0');
    add_param(m, e, prefix + ".ln2.g", 1, h, '1');
    add_param(m, e, prefix + ".ln2.b", 1, h, '0');
    add_param(m, e, prefix + ".mlp.w1", h, mh, 'w');
    add_param(m, e, prefix + ".mlp.b1", 1, mh, '0');
    add_param(m, e, prefix + ".mlp.w2", mh, h, 'w');
    add_param(m, e, prefix + ".mlp.b2", 1, h, '0');
}

}  // namespace

template <typename T>
Model<T> init_model(const NetworkConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Model<T> m;
    m.config = cfg;
    rng::Engine e(seed);
    const int half = cfg.embed_dim / 2;
    if (cfg.embedding != Embedding::kPositionOnly) {
        add_param(m, e, "fe.w1", 3, half, 'w');
        add_param(m, e, "fe.b1", 1, half, '0');
        add_param(m, e, "fe.w2", half, half, 'w');
        add_param(m, e, "fe.b2", 1, half, '0');
    }
    add_param(m, e, "pe.w1", 3, cfg.embed_dim, 'w');
    add_param(m, e, "pe.b1", 1, cfg.embed_dim, '0');
    add_param(m, e, "pe.w2", cfg.embed_dim, cfg.embed_dim, 'w');
    add_param(m, e, "pe.b2", 1, cfg.embed_dim, '0');
    add_param(m, e, "enc.proj.w", cfg.embed_dim, cfg.hidden_dim, 'w');
    add_param(m, e, "enc.proj.b", 1, cfg.hidden_dim, '0');
    for (int i = 0; i < cfg.encoder_depth; ++i) {
        add_block_params(m, e, "enc.blk" + std::to_string(i), cfg);
    }
    add_param(m, e, "enc.final_ln.g", 1, cfg.hidden_dim, '1');
    add_param(m, e, "enc.final_ln.b", 1, cfg.hidden_dim, '0');
    add_param(m, e, "dec.pe_proj.w", cfg.embed_dim, cfg.hidden_dim, 'w');
    add_param(m, e, "dec.pe_proj.b", 1, cfg.hidden_dim, '0');
    add_param(m, e, "dec.mask_token", 1, cfg.hidden_dim, 'n');
    for (int i = 0; i < cfg.decoder_depth; ++i) {
        add_block_params(m, e, "dec.blk" + std::to_string(i), cfg);
    }
    add_param(m, e, "dec.final_ln.g", 1, cfg.hidden_dim, '1');
    add_param(m, e, "dec.final_ln.b", 1, cfg.hidden_dim, '0');
    add_param(m, e, "head.w", cfg.hidden_dim, cfg.patch_size * 3, 'w');
    add_param(m, e, "head.b", 1, cfg.patch_size * 3, '0');
    return m;
}

template <typename T>
BoundModel<T> bind_model(ad::Tape<T>& tape, const Model<T>& model, bool requires_grad) {
    BoundModel<T> bm;
    bm.model = &model;
    bm.ids.reserve(model.params.size());
    for (const auto& p : model.params) {
        bm.ids.push_back(tape.add_input(p.shape, p.value, requires_grad, p.name.c_str()));
    }
    return bm;
}

namespace {

// layernorm followed by the block's learned gain and bias
template <typename T>
int affine_norm(ad::Tape<T>& t, const BoundModel<T>& bm, int x, const std::string& prefix) {
    const int n = ad::layernorm(t, x);
    return ad::add(t, ad::mul(t, n, bm.id(prefix + ".g")), bm.id(prefix + ".b"));
}

template <typename T>
int multihead_attention(ad::Tape<T>& t, const BoundModel<T>& bm, int x,
                        const std::string& prefix) {
    const NetworkConfig& c = bm.model->config;
    const int dh = c.hidden_dim / c.heads;
    const int q = ad::add(t, ad::matmul(t, x, bm.id(prefix + ".wq")), bm.id(prefix + ".bq"));
    const int k = ad::add(t, ad::matmul(t, x, bm.id(prefix + ".wk")), bm.id(prefix + ".bk"));
    const int v = ad::add(t, ad::matmul(t, x, bm.id(prefix + ".wv")), bm.id(prefix + ".bv"));
    std::vector<int> heads;
    heads.reserve(std::size_t(c.heads));
    for (int h = 0; h < c.heads; ++h) {
        const int qh = ad::slice_cols(t, q, h * dh, (h + 1) * dh);
        const int kh = ad::slice_cols(t, k, h * dh, (h + 1) * dh);
        const int vh = ad::slice_cols(t, v, h * dh, (h + 1) * dh);
        const int scores =
            ad::scale(t, ad::matmul(t, qh, ad::transpose(t, kh)), 1.0 / std::sqrt(double(dh)));
        heads.push_back(ad::matmul(t, ad::softmax(t, scores), vh));
    }
    const int merged = ad::concat(t, heads, 1);
    return ad::add(t, ad::matmul(t, merged, bm.id(prefix + ".wo")), bm.id(prefix + ".bo"));
}

// pre-norm transformer block: x + Attn(LN(x)), then x + MLP(LN(x))
template <typename T>
int transformer_block(ad::Tape<T>& t, const BoundModel<T>& bm, int x, const std::string& prefix) {
    x = ad::add(t, x, multihead_attention(t, bm, affine_norm(t, bm, x, prefix + ".ln1"), prefix + ".attn"));
    int h = affine_norm(t, bm, x, prefix + ".ln2");
    h = ad::add(t, ad::matmul(t, h, bm.id(prefix + ".mlp.w1")), bm.id(prefix + ".mlp.b1"));
    h = ad::gelu(t, h);
    h = ad::add(t, ad::matmul(t, h, bm.id(prefix + ".mlp.w2")), bm.id(prefix + ".mlp.b2"));
    return ad::add(t, x, h);
}

// shared-weight perceptron block: every token is concatenated with the
// max-pooled batch context and passed through one gelu layer
template <typename T>
int smlp_block(ad::Tape<T>& t, const BoundModel<T>& bm, int x, const std::string& prefix) {
    const int rows = t.shape(x).rows;
    const int pooled = ad::max_pool(t, x, rows);
    const int context = ad::gather_rows(t, pooled, std::vector<int>(std::size_t(rows), 0));
    const int cat = ad::concat(t, {x, context}, 1);
    return ad::gelu(t, ad::add(t, ad::matmul(t, cat, bm.id(prefix + ".smlp.w")),
                               bm.id(prefix + ".smlp.b")));
}

template <typename T>
int mixer_block(ad::Tape<T>& t, const BoundModel<T>& bm, int x, const std::string& prefix) {
    return bm.model->config.integrator == Integrator::kSharedMLP
               ? smlp_block(t, bm, x, prefix)
               : transformer_block(t, bm, x, prefix);
}

template <typename T>
std::vector<T> flatten_local_points(const PatchSet& patches) {
    std::vector<T> flat;
    for (const auto& group : patches.local_points) {
        for (const auto& q : group) {
            flat.push_back(T(q.x()));
            flat.push_back(T(q.y()));
            flat.push_back(T(q.z()));
        }
    }
    return flat;
}

template <typename T>
std::vector<T> flatten_centers(const PatchSet& patches) {
    std::vector<T> flat;
    flat.reserve(patches.centers.size() * 3);
    for (const auto& c : patches.centers) {
        flat.push_back(T(c.x()));
        flat.push_back(T(c.y()));
        flat.push_back(T(c.z()));
    }
    return flat;
}

void split_visibility(const PatchSet& patches, std::vector<int>& visible_idx,
                      std::vector<int>& masked_idx) {
    visible_idx.clear();
    masked_idx.clear();
    for (std::size_t i = 0; i < patches.num_patches(); ++i) {
        if (patches.visible[i]) {
            visible_idx.push_back(int(i));
        } else {
            masked_idx.push_back(int(i));
        }
    }
}

// All patches carry the same point count; it must match the prediction head.
int checked_patch_size(const PatchSet& patches, const NetworkConfig& cfg) {
    if (patches.num_patches() == 0) {
        throw std::invalid_argument("patch set is empty");
    }
    const int k = int(patches.local_points.front().size());
    if (k != cfg.patch_size) {
        throw std::invalid_argument("patch size " + std::to_string(k) +
                                    " does not match the model's configured " +
                                    std::to_string(cfg.patch_size));
    }
    return k;
}

// one token per patch, built per the configured embedding mode;
// pe_all (the [M x embed] position embedding) is always produced because
// the decoder consumes it in every mode
template <typename T>
std::pair<int, int> tokens_and_pe(ad::Tape<T>& tape, const BoundModel<T>& bm, int pts,
                                  int centers, int num_patches) {
    const int pe_all = pe_node(tape, bm, centers);
    switch (bm.model->config.embedding) {
        case Embedding::kPositionOnly:
            return {pe_all, pe_all};
        case Embedding::kFeatureOnly:
            return {fe_node(tape, bm, pts, num_patches), pe_all};
        case Embedding::kBoth:
        default:
            return {ad::add(tape, fe_node(tape, bm, pts, num_patches), pe_all), pe_all};
    }
}

}  // namespace

template <typename T>
int fe_node(ad::Tape<T>& tape, const BoundModel<T>& bm, int local_points, int num_patches) {
    const int rows = tape.shape(local_points).rows;
    if (num_patches <= 0 || rows % num_patches != 0) {
        throw std::invalid_argument("feature embed: point rows must split evenly into patches");
    }
    const int group = rows / num_patches;
    int h1 = ad::add(tape, ad::matmul(tape, local_points, bm.id("fe.w1")), bm.id("fe.b1"));
    h1 = ad::relu(tape, h1);
    int h2 = ad::add(tape, ad::matmul(tape, h1, bm.id("fe.w2")), bm.id("fe.b2"));
    h2 = ad::relu(tape, h2);
    const int pooled_final = ad::max_pool(tape, h2, group);
    const int pooled_skip = ad::max_pool(tape, h1, group);
    return ad::concat(tape, {pooled_final, pooled_skip}, 1);
}

template <typename T>
int pe_node(ad::Tape<T>& tape, const BoundModel<T>& bm, int centers) {
    int h = ad::add(tape, ad::matmul(tape, centers, bm.id("pe.w1")), bm.id("pe.b1"));
    h = ad::gelu(tape, h);
    return ad::add(tape, ad::matmul(tape, h, bm.id("pe.w2")), bm.id("pe.b2"));
}

template <typename T>
int encode_node(ad::Tape<T>& tape, const BoundModel<T>& bm, int tokens,
                const std::vector<int>& visible_idx) {
    if (visible_idx.empty()) {
        throw std::invalid_argument("encode: at least one visible token is required");
    }
    int x = ad::gather_rows(tape, tokens, visible_idx);
    x = ad::add(tape, ad::matmul(tape, x, bm.id("enc.proj.w")), bm.id("enc.proj.b"));
    for (int i = 0; i < bm.model->config.encoder_depth; ++i) {
        x = mixer_block(tape, bm, x, "enc.blk" + std::to_string(i));
    }
    return affine_norm(tape, bm, x, "enc.final_ln");
}

template <typename T>
int decode_predict_node(ad::Tape<T>& tape, const BoundModel<T>& bm, int encoded, int pe_all,
                        const std::vector<int>& visible_idx, const std::vector<int>& masked_idx) {
    if (masked_idx.empty()) {
        throw std::invalid_argument("decode: at least one masked slot is required");
    }
    const int num_visible = int(visible_idx.size());
    const int num_masked = int(masked_idx.size());
    const int dpe = ad::add(tape, ad::matmul(tape, pe_all, bm.id("dec.pe_proj.w")),
                            bm.id("dec.pe_proj.b"));
    const int vis_part = ad::add(tape, encoded, ad::gather_rows(tape, dpe, visible_idx));
    const int mask_copies = ad::gather_rows(tape, bm.id("dec.mask_token"),
                                            std::vector<int>(std::size_t(num_masked), 0));
    const int mask_part = ad::add(tape, mask_copies, ad::gather_rows(tape, dpe, masked_idx));
    int x = ad::concat(tape, {vis_part, mask_part}, 0);
    for (int i = 0; i < bm.model->config.decoder_depth; ++i) {
        x = mixer_block(tape, bm, x, "dec.blk" + std::to_string(i));
    }
    x = affine_norm(tape, bm, x, "dec.final_ln");
    std::vector<int> masked_rows(static_cast<std::size_t>(num_masked));
    std::iota(masked_rows.begin(), masked_rows.end(), num_visible);
    const int masked_feats = ad::gather_rows(tape, x, masked_rows);
    const int flat = ad::add(tape, ad::matmul(tape, masked_feats, bm.id("head.w")),
                             bm.id("head.b"));
    return ad::reshape(tape, flat, ad::Shape{num_masked * bm.model->config.patch_size, 3});
}

template <typename T>
int reconstruction_loss_node(ad::Tape<T>& tape, const BoundModel<T>& bm,
                             const PatchSet& patches) {
    const int m = int(patches.num_patches());
    const int k = checked_patch_size(patches, bm.model->config);
    std::vector<int> visible_idx;
    std::vector<int> masked_idx;
    split_visibility(patches, visible_idx, masked_idx);
    if (masked_idx.empty()) {
        throw std::invalid_argument("reconstruction loss: no masked patches");
    }
    const int pts = tape.add_input(ad::Shape{m * k, 3}, flatten_local_points<T>(patches), false,
                                   "patch_points");
    const int centers =
        tape.add_input(ad::Shape{m, 3}, flatten_centers<T>(patches), false, "patch_centers");
    const auto [tokens, pe_all] = tokens_and_pe(tape, bm, pts, centers, m);
    const int encoded = encode_node(tape, bm, tokens, visible_idx);
    const int pred = decode_predict_node(tape, bm, encoded, pe_all, visible_idx, masked_idx);
    std::vector<T> target;
    target.reserve(std::size_t(masked_idx.size()) * std::size_t(k) * 3);
    for (const int mi : masked_idx) {
        for (const auto& q : patches.local_points[std::size_t(mi)]) {
            target.push_back(T(q.x()));
            target.push_back(T(q.y()));
            target.push_back(T(q.z()));
        }
    }
    return ad::chamfer_grouped(tape, pred, target, k);
}

template <typename T>
std::vector<T> feature_embed(const Model<T>& model, const std::vector<Vec3>& local_points) {
    if (local_points.empty()) throw std::invalid_argument("feature embed: empty patch");
    ad::Tape<T> tape;
    const BoundModel<T> bm = bind_model(tape, model, false);
    std::vector<T> flat;
    flat.reserve(local_points.size() * 3);
    for (const auto& q : local_points) {
        flat.push_back(T(q.x()));
        flat.push_back(T(q.y()));
        flat.push_back(T(q.z()));
    }
    const int pts = tape.add_input(ad::Shape{int(local_points.size()), 3}, std::move(flat), false,
                                   "patch_points");
    return tape.values(fe_node(tape, bm, pts, 1));
}

template <typename T>
std::vector<T> position_embed(const Model<T>& model, const Vec3& center) {
    ad::Tape<T> tape;
    const BoundModel<T> bm = bind_model(tape, model, false);
    const int c = tape.add_input(ad::Shape{1, 3}, {T(center.x()), T(center.y()), T(center.z())},
                                 false, "patch_center");
    return tape.values(pe_node(tape, bm, c));
}

template <typename T>
TokenBatch<T> make_tokens(const Model<T>& model, const PatchSet& patches) {
    const int m = int(patches.num_patches());
    const int k = checked_patch_size(patches, model.config);
    ad::Tape<T> tape;
    const BoundModel<T> bm = bind_model(tape, model, false);
    const int pts = tape.add_input(ad::Shape{m * k, 3}, flatten_local_points<T>(patches), false,
                                   "patch_points");
    const int centers =
        tape.add_input(ad::Shape{m, 3}, flatten_centers<T>(patches), false, "patch_centers");
    const int tokens = tokens_and_pe(tape, bm, pts, centers, m).first;
    TokenBatch<T> batch;
    batch.tokens = tape.values(tokens);
    batch.num_patches = m;
    batch.embed_dim = model.config.embed_dim;
    batch.visible = patches.visible;
    batch.centers = patches.centers;
    return batch;
}

template <typename T>
std::vector<T> encode(const Model<T>& model, const TokenBatch<T>& batch) {
    ad::Tape<T> tape;
    const BoundModel<T> bm = bind_model(tape, model, false);
    const int tokens = tape.add_input(ad::Shape{batch.num_patches, batch.embed_dim}, batch.tokens,
                                      false, "tokens");
    std::vector<int> visible_idx;
    for (int i = 0; i < batch.num_patches; ++i) {
        if (batch.visible[std::size_t(i)]) visible_idx.push_back(i);
    }
    return tape.values(encode_node(tape, bm, tokens, visible_idx));
}

template <typename T>
std::vector<std::vector<Vec3>> decode_and_predict(const Model<T>& model,
                                                  const TokenBatch<T>& batch) {
    std::vector<int> visible_idx;
    std::vector<int> masked_idx;
    for (int i = 0; i < batch.num_patches; ++i) {
        if (batch.visible[std::size_t(i)]) {
            visible_idx.push_back(i);
        } else {
            masked_idx.push_back(i);
        }
    }
    if (masked_idx.empty()) return {};
    ad::Tape<T> tape;
    const BoundModel<T> bm = bind_model(tape, model, false);
    const int tokens = tape.add_input(ad::Shape{batch.num_patches, batch.embed_dim}, batch.tokens,
                                      false, "tokens");
    std::vector<T> center_flat;
    center_flat.reserve(batch.centers.size() * 3);
    for (const auto& c : batch.centers) {
        center_flat.push_back(T(c.x()));
        center_flat.push_back(T(c.y()));
        center_flat.push_back(T(c.z()));
    }
    const int centers = tape.add_input(ad::Shape{batch.num_patches, 3}, std::move(center_flat),
                                       false, "patch_centers");
    const int encoded = encode_node(tape, bm, tokens, visible_idx);
    const int pred = decode_predict_node(tape, bm, encoded, pe_node(tape, bm, centers),
                                         visible_idx, masked_idx);
    const std::vector<T>& flat = tape.values(pred);
    const int k = model.config.patch_size;
    std::vector<std::vector<Vec3>> out(masked_idx.size());
    for (std::size_t p = 0; p < masked_idx.size(); ++p) {
        out[p].resize(std::size_t(k));
        for (int j = 0; j < k; ++j) {
            const std::size_t base = (p * std::size_t(k) + std::size_t(j)) * 3;
            out[p][std::size_t(j)] =
                Vec3(double(flat[base]), double(flat[base + 1]), double(flat[base + 2]));
        }
    }
    return out;
}

template <typename T>
double reconstruction_loss(const Model<T>& model, const PatchSet& patches) {
    ad::Tape<T> tape;
    const BoundModel<T> bm = bind_model(tape, model, false);
    return double(tape.values(reconstruction_loss_node(tape, bm, patches))[0]);
}

double chamfer_l2(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
    if (a.empty() || b.empty()) {
        throw std::invalid_argument("chamfer distance of an empty point set is undefined");
    }
    const KdTree tree_b(b);
    const KdTree tree_a(a);
    double sum_ab = 0.0;
    for (const auto& p : a) sum_ab += tree_b.nearest(p).d2;
    double sum_ba = 0.0;
    for (const auto& q : b) sum_ba += tree_a.nearest(q).d2;
    return sum_ab / double(a.size()) + sum_ba / double(b.size());
}

template <typename T>
std::vector<T> global_feature(const Model<T>& model, const PointCloud& cloud,
                              std::uint64_t patch_seed) {
    const NetworkConfig& c = model.config;
    PatchSet patches;
    try {
        patches = build_patches(cloud, c.num_patches, c.patch_size, c.level_fractions, patch_seed);
    } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(std::string("global feature: cloud too small for patching (") +
                                    e.what() + ")");
    }
    const int m = int(patches.num_patches());
    ad::Tape<T> tape;
    const BoundModel<T> bm = bind_model(tape, model, false);
    const int pts = tape.add_input(ad::Shape{m * c.patch_size, 3}, flatten_local_points<T>(patches),
                                   false, "patch_points");
    const int centers =
        tape.add_input(ad::Shape{m, 3}, flatten_centers<T>(patches), false, "patch_centers");
    const int tokens = tokens_and_pe(tape, bm, pts, centers, m).first;
    std::vector<int> all_idx(static_cast<std::size_t>(m));
    std::iota(all_idx.begin(), all_idx.end(), 0);
    const int encoded = encode_node(tape, bm, tokens, all_idx);
    return tape.values(ad::max_pool(tape, encoded, m));
}

template <typename T>
std::vector<CheckpointRecord> model_records(const Model<T>& model) {
    std::vector<CheckpointRecord> records;
    records.reserve(model.params.size());
    for (const auto& p : model.params) records.push_back(param_record(p));
    return records;
}

template <typename T>
void load_model_params(Model<T>& model, const std::vector<CheckpointRecord>& records) {
    std::size_t loaded = 0;
    for (const auto& rec : records) {
        const auto it = model.index.find(rec.name);
        if (it == model.index.end()) continue;  // optimizer moments etc. live elsewhere
        ad::Param<T>& p = model.params[std::size_t(it->second)];
        const std::vector<T> values = record_values<T>(rec);
        if (int(values.size()) != p.shape.size()) {
            throw ShapeError("checkpoint record " + rec.name + " has " +
                             std::to_string(values.size()) + " values, parameter wants " +
                             std::to_string(p.shape.size()));
        }
        p.value = values;
        ++loaded;
    }
    if (loaded != model.params.size()) {
        throw IntegrityError("checkpoint is missing " +
                             std::to_string(model.params.size() - loaded) +
                             " model parameter record(s)");
    }
}

template Model<float> init_model<float>(const NetworkConfig&, std::uint64_t);
template Model<double> init_model<double>(const NetworkConfig&, std::uint64_t);
template BoundModel<float> bind_model<float>(ad::Tape<float>&, const Model<float>&, bool);
template BoundModel<double> bind_model<double>(ad::Tape<double>&, const Model<double>&, bool);
template int fe_node<float>(ad::Tape<float>&, const BoundModel<float>&, int, int);
template int fe_node<double>(ad::Tape<double>&, const BoundModel<double>&, int, int);
template int pe_node<float>(ad::Tape<float>&, const BoundModel<float>&, int);
template int pe_node<double>(ad::Tape<double>&, const BoundModel<double>&, int);
template int encode_node<float>(ad::Tape<float>&, const BoundModel<float>&, int,
                                const std::vector<int>&);
template int encode_node<double>(ad::Tape<double>&, const BoundModel<double>&, int,
                                 const std::vector<int>&);
template int decode_predict_node<float>(ad::Tape<float>&, const BoundModel<float>&, int, int,
                                        const std::vector<int>&, const std::vector<int>&);
template int decode_predict_node<double>(ad::Tape<double>&, const BoundModel<double>&, int, int,
                                         const std::vector<int>&, const std::vector<int>&);
template int reconstruction_loss_node<float>(ad::Tape<float>&, const BoundModel<float>&,
                                             const PatchSet&);
template int reconstruction_loss_node<double>(ad::Tape<double>&, const BoundModel<double>&,
                                              const PatchSet&);
template std::vector<float> feature_embed<float>(const Model<float>&, const std::vector<Vec3>&);
template std::vector<double> feature_embed<double>(const Model<double>&, const std::vector<Vec3>&);
template std::vector<float> position_embed<float>(const Model<float>&, const Vec3&);
template std::vector<double> position_embed<double>(const Model<double>&, const Vec3&);
template TokenBatch<float> make_tokens<float>(const Model<float>&, const PatchSet&);
template TokenBatch<double> make_tokens<double>(const Model<double>&, const PatchSet&);
template std::vector<float> encode<float>(const Model<float>&, const TokenBatch<float>&);
template std::vector<double> encode<double>(const Model<double>&, const TokenBatch<double>&);
template std::vector<std::vector<Vec3>> decode_and_predict<float>(const Model<float>&,
                                                                  const TokenBatch<float>&);
template std::vector<std::vector<Vec3>> decode_and_predict<double>(const Model<double>&,
                                                                   const TokenBatch<double>&);
template double reconstruction_loss<float>(const Model<float>&, const PatchSet&);
template double reconstruction_loss<double>(const Model<double>&, const PatchSet&);
template std::vector<float> global_feature<float>(const Model<float>&, const PointCloud&,
                                                  std::uint64_t);
template std::vector<double> global_feature<double>(const Model<double>&, const PointCloud&,
                                                    std::uint64_t);
template std::vector<CheckpointRecord> model_records<float>(const Model<float>&);
template std::vector<CheckpointRecord> model_records<double>(const Model<double>&);
template void load_model_params<float>(Model<float>&, const std::vector<CheckpointRecord>&);
template void load_model_params<double>(Model<double>&, const std::vector<CheckpointRecord>&);

}  // namespace lprnet
