#include "lprnet/training.hpp"

#include "lprnet/checkpoint.hpp"
#include "lprnet/errors.hpp"
#include "lprnet/sampling.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <stdexcept>
#include <utility>

namespace lprnet {

void TrainConfig::validate() const {
    if (epochs < 1) throw std::invalid_argument("train config: epochs must be at least 1");
    if (batch_size < 1) throw std::invalid_argument("train config: batch_size must be at least 1");
    if (!(base_lr > 0.0)) throw std::invalid_argument("train config: base_lr must be positive");
    if (weight_decay < 0.0) {
        throw std::invalid_argument("train config: weight_decay must be non-negative");
    }
    if (checkpoint_every < 0) {
        throw std::invalid_argument("train config: checkpoint_every must be non-negative");
    }
    if (stop_after_epochs < 0 || stop_after_epochs > epochs) {
        throw std::invalid_argument("train config: stop_after_epochs must lie in [0, epochs]");
    }
}

Mat3 vertical_rotation(double angle) {
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    Mat3 r = Mat3::Identity();
    r(0, 0) = c;
    r(0, 1) = -s;
    r(1, 0) = s;
    r(1, 1) = c;
    return r;
}

Mat3 random_rotation(rng::Engine& engine, bool full_so3) {
    if (!full_so3) {
        return vertical_rotation(rng::uniform(engine, 0.0, 2.0 * M_PI));
    }
    // uniform quaternion on the 3-sphere
    const double u1 = rng::uniform(engine);
    const double u2 = rng::uniform(engine);
    const double u3 = rng::uniform(engine);
    const double a = std::sqrt(1.0 - u1);
    const double b = std::sqrt(u1);
    const Eigen::Quaterniond q(b * std::cos(2.0 * M_PI * u3), a * std::sin(2.0 * M_PI * u2),
                               a * std::cos(2.0 * M_PI * u2), b * std::sin(2.0 * M_PI * u3));
    return q.normalized().toRotationMatrix();
}

PointCloud rotate_cloud(const PointCloud& cloud, const Mat3& rotation) {
    PointCloud out = cloud;
    for (auto& p : out.points) p = rotation * p;
    return out;
}

PointCloud augment_random_rotation(const PointCloud& cloud, std::uint64_t seed, bool full_so3) {
    rng::Engine engine(seed);
    return rotate_cloud(cloud, random_rotation(engine, full_so3));
}

namespace {

// the size conditions under which patch building succeeds
bool cloud_patchable(std::size_t n, const NetworkConfig& net) {
    if (n < 1 || std::size_t(net.num_patches) > n) return false;
    const double min_frac = *std::min_element(net.level_fractions.begin(),
                                              net.level_fractions.end());
    const std::size_t coarsest =
        std::max<std::size_t>(1, std::size_t(std::llround(min_frac * double(n))));
    return std::size_t(net.patch_size) <= coarsest;
}

std::uint32_t lo32(std::uint64_t v) { return std::uint32_t(v & 0xffffffffull); }
std::uint32_t hi32(std::uint64_t v) { return std::uint32_t(v >> 32); }

}  // namespace

template <typename T>
void save_train_state(const std::string& path, const Model<T>& model,
                      const ad::OptimizerState<T>& opt, int next_epoch, std::uint64_t seed) {
    std::vector<CheckpointRecord> records = model_records(model);
    for (std::size_t i = 0; i < model.params.size(); ++i) {
        const auto& p = model.params[i];
        const std::vector<std::uint32_t> dims = {std::uint32_t(p.shape.rows),
                                                 std::uint32_t(p.shape.cols)};
        records.push_back(make_record<T>("opt.m." + p.name, dims, opt.m[i]));
        records.push_back(make_record<T>("opt.v." + p.name, dims, opt.v[i]));
    }
    const std::uint64_t step = std::uint64_t(opt.step);
    const std::vector<double> meta = {double(lo32(step)), double(hi32(step)), double(lo32(seed)),
                                      double(hi32(seed)), double(next_epoch)};
    records.push_back(make_record<double>("train.meta", {1, 5}, meta));
    save_checkpoint(path, records);
}

template <typename T>
TrainState<T> load_train_state(const std::string& path, const NetworkConfig& net) {
    const std::vector<CheckpointRecord> records = load_checkpoint(path);
    TrainState<T> state;
    state.model = init_model<T>(net, 0);
    load_model_params(state.model, records);

    state.opt = ad::init_optimizer(state.model.params, 1e-3, 0.01);
    auto find = [&records](const std::string& name) -> const CheckpointRecord& {
        for (const auto& r : records) {
            if (r.name == name) return r;
        }
        throw IntegrityError("checkpoint is missing record " + name);
    };
    for (std::size_t i = 0; i < state.model.params.size(); ++i) {
        const std::string& pname = state.model.params[i].name;
        state.opt.m[i] = record_values<T>(find("opt.m." + pname));
        state.opt.v[i] = record_values<T>(find("opt.v." + pname));
        if (state.opt.m[i].size() != state.model.params[i].value.size() ||
            state.opt.v[i].size() != state.model.params[i].value.size()) {
            throw IntegrityError("checkpoint moment size mismatch for " + pname);
        }
    }
    const std::vector<double> meta = record_values<double>(find("train.meta"));
    if (meta.size() != 5) throw IntegrityError("checkpoint train.meta record is malformed");
    state.opt.step = std::int64_t((std::uint64_t(meta[1]) << 32) | std::uint64_t(meta[0]));
    state.seed = (std::uint64_t(meta[3]) << 32) | std::uint64_t(meta[2]);
    state.next_epoch = int(meta[4]);
    return state;
}

template <typename T>
TrainResult<T> train_on_clouds(const TrainConfig& cfg, const NetworkConfig& net,
                               const std::vector<PointCloud>& clouds) {
    cfg.validate();
    net.validate();

    std::vector<const PointCloud*> usable;
    usable.reserve(clouds.size());
    for (std::size_t i = 0; i < clouds.size(); ++i) {
        if (cloud_patchable(clouds[i].points.size(), net)) {
            usable.push_back(&clouds[i]);
        } else {
            std::cerr << "warning: skipping training cloud " << i << " ("
                      << clouds[i].points.size() << " points): too small for "
                      << net.num_patches << " patches of " << net.patch_size << "\n";
        }
    }
    if (usable.empty()) {
        throw std::invalid_argument("training dataset: no cloud is large enough for patching");
    }

    TrainResult<T> result;
    ad::OptimizerState<T> opt;
    std::uint64_t seed = cfg.seed;
    int start_epoch = 0;
    if (!cfg.resume_path.empty()) {
        TrainState<T> state = load_train_state<T>(cfg.resume_path, net);
        result.model = std::move(state.model);
        opt = std::move(state.opt);
        start_epoch = state.next_epoch;
        seed = state.seed;  // the stored seed keeps every derived stream aligned
    } else {
        result.model = init_model<T>(net, derive_seed(cfg.seed, "init", 0));
        opt = ad::init_optimizer(result.model.params, cfg.base_lr, cfg.weight_decay);
    }
    opt.base_lr = cfg.base_lr;
    opt.weight_decay = cfg.weight_decay;
    result.first_epoch = start_epoch;

    const std::size_t n = usable.size();
    const std::size_t batch = std::size_t(cfg.batch_size);
    const std::size_t steps_per_epoch = (n + batch - 1) / batch;
    const std::int64_t total_steps = std::int64_t(cfg.epochs) * std::int64_t(steps_per_epoch);

    std::ofstream log_out;
    if (!cfg.log_path.empty()) {
        log_out.open(cfg.log_path, cfg.resume_path.empty() ? std::ios::trunc : std::ios::app);
        if (!log_out) throw IoError("cannot open training log " + cfg.log_path);
    }

    for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), std::size_t(0));
        rng::Engine shuffle_engine(derive_seed(seed, "shuffle", std::uint64_t(epoch)));
        rng::shuffle(shuffle_engine, order);

        double epoch_sum = 0.0;
        for (std::size_t b = 0; b < steps_per_epoch; ++b) {
            const std::size_t begin = b * batch;
            const std::size_t end = std::min(begin + batch, n);
            try {
                ad::Tape<T> tape;
                const BoundModel<T> bm = bind_model(tape, result.model, true);
                int total = -1;
                for (std::size_t j = begin; j < end; ++j) {
                    const std::size_t ci = order[j];
                    const std::uint64_t stream = std::uint64_t(epoch) * n + ci;
                    const auto normed = normalize(*usable[ci]);
                    const PointCloud aug = augment_random_rotation(
                        normed.first, derive_seed(seed, "augment", stream), cfg.full_so3_augment);
                    for (const auto& p : aug.points) {
                        if (!p.allFinite()) {
                            throw NumericFault("training cloud " + std::to_string(ci) +
                                               " has non-finite coordinates");
                        }
                    }
                    PatchSet set =
                        build_patches(aug, std::size_t(net.num_patches),
                                      std::size_t(net.patch_size), net.level_fractions,
                                      derive_seed(seed, "patch", stream));
                    set.visible =
                        generate_mask(set.num_patches(), net.mask_ratio, MaskStrategy::kHybrid,
                                      set.centers, derive_seed(seed, "mask", stream));
                    const int loss = reconstruction_loss_node(tape, bm, set);
                    total = (total < 0) ? loss : ad::add(tape, total, loss);
                }
                total = ad::scale(tape, total, 1.0 / double(end - begin));
                const double loss_value = double(tape.values(total)[0]);
                tape.backward(total);
                std::vector<std::vector<T>> grads;
                grads.reserve(result.model.params.size());
                for (std::size_t i = 0; i < result.model.params.size(); ++i) {
                    grads.push_back(tape.grad(bm.ids[i]));
                }
                const std::int64_t global_step =
                    std::int64_t(epoch) * std::int64_t(steps_per_epoch) + std::int64_t(b);
                const double lr = ad::cosine_lr(global_step, total_steps, cfg.base_lr);
                ad::adamw_step(opt, result.model.params, grads, lr);

                result.step_losses.push_back(loss_value);
                epoch_sum += loss_value;
                if (log_out) {
                    nlohmann::json line;
                    line["epoch"] = epoch;
                    line["step"] = global_step;
                    line["loss"] = loss_value;
                    line["lr"] = lr;
                    log_out << line.dump() << '\n';
                }
            } catch (const NumericFault& fault) {
                throw NumericFault("epoch " + std::to_string(epoch) + " batch " +
                                   std::to_string(b) + ": " + fault.what());
            }
        }
        result.epoch_means.push_back(epoch_sum / double(steps_per_epoch));

        const bool stopping = cfg.stop_after_epochs > 0 && epoch + 1 == cfg.stop_after_epochs;
        if (!cfg.checkpoint_path.empty()) {
            const bool cadence =
                cfg.checkpoint_every > 0 && (epoch + 1 - start_epoch) % cfg.checkpoint_every == 0;
            const bool last = epoch + 1 == cfg.epochs || stopping;
            if (cadence || last) {
                save_train_state(cfg.checkpoint_path, result.model, opt, epoch + 1, seed);
            }
        }
        if (stopping) break;
    }
    return result;
}

template <typename T>
TrainResult<T> train(const TrainConfig& cfg, const NetworkConfig& net) {
    cfg.validate();
    if (cfg.dataset.empty()) {
        throw std::invalid_argument("train config: dataset path list is empty");
    }
    std::vector<PointCloud> clouds;
    clouds.reserve(cfg.dataset.size());
    for (const auto& path : cfg.dataset) {
        const std::string ext = std::filesystem::path(path).extension().string();
        clouds.push_back(ext == ".ply" ? load_ply(path) : load_xyz(path));
    }
    return train_on_clouds<T>(cfg, net, clouds);
}

template void save_train_state<float>(const std::string&, const Model<float>&,
                                      const ad::OptimizerState<float>&, int, std::uint64_t);
template void save_train_state<double>(const std::string&, const Model<double>&,
                                       const ad::OptimizerState<double>&, int, std::uint64_t);
template TrainState<float> load_train_state<float>(const std::string&, const NetworkConfig&);
template TrainState<double> load_train_state<double>(const std::string&, const NetworkConfig&);
template TrainResult<float> train_on_clouds<float>(const TrainConfig&, const NetworkConfig&,
                                                   const std::vector<PointCloud>&);
template TrainResult<double> train_on_clouds<double>(const TrainConfig&, const NetworkConfig&,
                                                     const std::vector<PointCloud>&);
template TrainResult<float> train<float>(const TrainConfig&, const NetworkConfig&);
template TrainResult<double> train<double>(const TrainConfig&, const NetworkConfig&);

}  // namespace lprnet
