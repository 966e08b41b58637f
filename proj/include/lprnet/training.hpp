#pragma once

#include "lprnet/autodiff.hpp"
#include "lprnet/cloud.hpp"
#include "lprnet/network.hpp"
#include "lprnet/rng.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace lprnet {

struct TrainConfig {
    int epochs = 30;
    int batch_size = 4;
    double base_lr = 1e-3;
    double weight_decay = 0.01;
    std::uint64_t seed = 1;
    bool desk_scale = true;        // selects the default network scale in the CLI
    bool full_so3_augment = false; // default: rotations about the vertical axis
    std::vector<std::string> dataset;  // cloud files (.xyz or .ply)
    std::string log_path;              // line-delimited JSON; empty = no log
    std::string checkpoint_path;       // empty = no checkpoints written
    int checkpoint_every = 0;          // epochs between checkpoints; 0 = final only
    std::string resume_path;           // continue from this checkpoint if set
    int stop_after_epochs = 0;         // halt early (schedule still spans `epochs`); 0 = off

    void validate() const;
};

// --- augmentation ---

Mat3 vertical_rotation(double angle);

// uniform over rotations about the vertical axis, or over all of SO(3)
Mat3 random_rotation(rng::Engine& engine, bool full_so3);

PointCloud rotate_cloud(const PointCloud& cloud, const Mat3& rotation);

PointCloud augment_random_rotation(const PointCloud& cloud, std::uint64_t seed,
                                   bool full_so3 = false);

// --- training ---

template <typename T>
struct TrainResult {
    Model<T> model;
    std::vector<double> step_losses;  // one mean loss per optimizer step
    std::vector<double> epoch_means;  // one mean loss per epoch run
    int first_epoch = 0;              // > 0 when resumed from a checkpoint
};

template <typename T>
TrainResult<T> train_on_clouds(const TrainConfig& cfg, const NetworkConfig& net,
                               const std::vector<PointCloud>& clouds);

// loads cfg.dataset from disk, then trains
template <typename T>
TrainResult<T> train(const TrainConfig& cfg, const NetworkConfig& net);

// --- checkpoint plumbing (model + optimizer moments + schedule position) ---

template <typename T>
struct TrainState {
    Model<T> model;
    ad::OptimizerState<T> opt;
    int next_epoch = 0;
    std::uint64_t seed = 0;
};

template <typename T>
void save_train_state(const std::string& path, const Model<T>& model,
                      const ad::OptimizerState<T>& opt, int next_epoch, std::uint64_t seed);

template <typename T>
TrainState<T> load_train_state(const std::string& path, const NetworkConfig& net);

}  // namespace lprnet
