// lprnet — command-line surface for the registration pipeline.
//
// Subcommands: gen-sim, train, register, evaluate, filter-ground, info,
// ablate.  Exit codes: 0 success, 2 usage error, 3 registration did not
// converge (the result is still written), 4 I/O failure, 5 internal error.

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lprnet/checkpoint.hpp"
#include "lprnet/cloud.hpp"
#include "lprnet/errors.hpp"
#include "lprnet/eval.hpp"
#include "lprnet/geometry.hpp"
#include "lprnet/network.hpp"
#include "lprnet/registration.hpp"
#include "lprnet/run_config.hpp"
#include "lprnet/simdata.hpp"
#include "lprnet/threading.hpp"
#include "lprnet/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitSuccess = 0;
constexpr int kExitUsage = 2;
constexpr int kExitNotConverged = 3;
constexpr int kExitIo = 4;
constexpr int kExitInternal = 5;

// Maps library exceptions onto the documented exit codes.  Invalid arguments
// (including shape mismatches) are usage errors; file and format problems are
// I/O errors; anything else is internal.
int run_guarded(const std::function<int()>& body) {
    try {
        return body();
    } catch (const lprnet::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const lprnet::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const lprnet::UnsupportedFormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const lprnet::UnsupportedVersionError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const lprnet::IntegrityError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kExitInternal;
    }
}

std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

lprnet::PointCloud load_cloud(const std::string& path) {
    const std::string ext = fs::path(path).extension().string();
    return ext == ".ply" ? lprnet::load_ply(path) : lprnet::load_xyz(path);
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw lprnet::IoError("cannot open for writing: " + path);
    out << text;
    if (!out.flush()) throw lprnet::IoError("write failed: " + path);
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw lprnet::IoError("cannot open: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Keeps the source cloud points that fall inside a horizontal box.  Used to
// register a scene region at a time instead of the full extent.
lprnet::PointCloud crop_xy(const lprnet::PointCloud& cloud, const std::vector<double>& box) {
    lprnet::PointCloud out;
    out.source_label = cloud.source_label;
    for (std::size_t i = 0; i < cloud.points.size(); ++i) {
        const auto& p = cloud.points[i];
        if (p.x() < box[0] || p.x() > box[2] || p.y() < box[1] || p.y() > box[3]) continue;
        out.points.push_back(p);
        if (cloud.has_ground_flags()) out.ground_flag.push_back(cloud.ground_flag[i]);
    }
    return out;
}

lprnet::RunConfig load_optional_config(const std::string& path) {
    if (path.empty()) return lprnet::RunConfig{};
    return lprnet::load_run_config(path);
}

// ---------------------------------------------------------------------------
// gen-sim

struct GenSimArgs {
    std::string base = "plane+boxes";
    std::size_t n = 2048;
    std::size_t pairs = 10;
    double sigma = 0.1;
    double occlusion = 0.3;
    double rot_max = 30.0;
    double trans_max = 2.0;
    std::uint64_t seed = 0;
    std::string out;
    bool uniform_dropout = false;
    bool vertical_axis = false;
};

int cmd_gen_sim(const GenSimArgs& a) {
    lprnet::PairSetConfig cfg;
    cfg.base_name = a.base;
    cfg.points = a.n;
    cfg.pairs = a.pairs;
    cfg.spec.noise_sigma = a.sigma;
    cfg.spec.occlusion_rate = a.occlusion;
    cfg.spec.rot_max_deg = a.rot_max;
    cfg.spec.trans_max = a.trans_max;
    cfg.spec.contiguous_occlusion = !a.uniform_dropout;
    cfg.spec.vertical_axis_only = a.vertical_axis;
    cfg.spec.seed = a.seed;
    const std::string manifest = lprnet::write_pair_set(cfg, a.out);
    std::cout << "wrote " << a.pairs << " pairs (base " << a.base << ", " << a.n
              << " points, sigma " << a.sigma << ", occlusion " << a.occlusion
              << ", rot<=" << a.rot_max << " deg, trans<=" << a.trans_max
              << ", seed " << a.seed << ")\nmanifest: " << manifest << "\n";
    return kExitSuccess;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
    std::string config;
    std::vector<std::string> data;
    std::string out = "model.ckpt";
    std::string log;
    bool desk_scale = false;   // marker flag; desk scale is already the default
    bool paper_scale = false;
    int epochs = -1;
    long long seed = -1;
    std::string resume;
    int stop_after = 0;
};

int cmd_train(const TrainArgs& a) {
    lprnet::RunConfig rc = load_optional_config(a.config);
    if (a.paper_scale) {
        // The preset replaces the whole network section; mixing both would
        // leave it ambiguous which dimension wins.
        if (!a.config.empty()) {
            const json doc = json::parse(slurp(a.config));
            if (doc.contains("network"))
                throw std::invalid_argument(
                    "pass either --paper-scale or a \"network\" config section, not both");
        }
        rc.network = lprnet::NetworkConfig::paper_scale();
    }
    lprnet::TrainConfig& tc = rc.training;
    if (!a.data.empty()) tc.dataset = a.data;
    if (tc.dataset.empty()) throw std::invalid_argument("no training data; pass --data");
    if (a.epochs >= 0) tc.epochs = a.epochs;
    if (a.seed >= 0) tc.seed = static_cast<std::uint64_t>(a.seed);
    if (!a.resume.empty()) tc.resume_path = a.resume;
    if (a.stop_after > 0) tc.stop_after_epochs = a.stop_after;
    tc.checkpoint_path = a.out;
    tc.log_path = a.log.empty() ? a.out + ".log.jsonl" : a.log;

    const lprnet::TrainResult result = lprnet::train<float>(tc, rc.network);
    for (std::size_t e = 0; e < result.epoch_means.size(); ++e)
        std::cout << "epoch " << result.first_epoch + e + 1 << "/" << tc.epochs
                  << " mean-loss " << result.epoch_means[e] << "\n";
    std::cout << "checkpoint: " << tc.checkpoint_path << "\nloss log: " << tc.log_path << "\n";
    return kExitSuccess;
}

// ---------------------------------------------------------------------------
// register

struct RegisterArgs {
    std::string source;
    std::string target;
    std::string features = "moments";
    std::string checkpoint;
    int moment_order = 2;
    std::string out;
    std::string report;
    std::vector<double> crop;
    std::uint64_t seed = lprnet::kDefaultPatchSeed;
    std::string config;
    int max_iterations = -1;
    double tolerance = -1.0;
};

json registration_diagnostics(const lprnet::RegistrationResult& result, double rmse_before,
                              double rmse_after) {
    json doc;
    doc["converged"] = result.converged;
    doc["iterations"] = result.iterations;
    doc["rank_deficient"] = result.rank_deficient;
    doc["residual_norms"] = result.residual_norms;
    doc["xi_norms"] = result.xi_norms;
    doc["rmse_nn_before"] = rmse_before;
    doc["rmse_nn_after"] = rmse_after;
    const Eigen::Matrix3d& r = result.transform.rotation;
    const Eigen::Vector3d& t = result.transform.translation;
    doc["rotation"] = {r(0, 0), r(0, 1), r(0, 2), r(1, 0), r(1, 1),
                       r(1, 2), r(2, 0), r(2, 1), r(2, 2)};
    doc["translation"] = {t.x(), t.y(), t.z()};
    return doc;
}

int cmd_register(const RegisterArgs& a) {
    if (a.features == "learned" && a.checkpoint.empty())
        throw std::invalid_argument("learned features require --checkpoint");
    if (!a.crop.empty()) {
        if (a.crop[0] >= a.crop[2] || a.crop[1] >= a.crop[3])
            throw std::invalid_argument("--crop needs xmin < xmax and ymin < ymax");
    }

    lprnet::RunConfig rc = load_optional_config(a.config);
    lprnet::ICLKConfig reg = rc.registration;
    if (a.max_iterations > 0) reg.max_iterations = a.max_iterations;
    if (a.tolerance > 0) reg.tolerance = a.tolerance;

    lprnet::PointCloud source = load_cloud(a.source);
    lprnet::PointCloud target = load_cloud(a.target);
    if (!a.crop.empty()) {
        source = crop_xy(source, a.crop);
        target = crop_xy(target, a.crop);
        if (source.points.empty() || target.points.empty())
            throw std::invalid_argument("--crop box leaves an empty cloud");
    }

    // Learned feature models must stay alive through iclk_register; both
    // precisions are declared here so whichever the checkpoint holds survives.
    lprnet::Model<float> model_f;
    lprnet::Model<double> model_d;
    lprnet::RegistrationResult result;
    if (a.features == "icp") {
        result = lprnet::icp_register(source, target, reg.max_iterations, reg.tolerance);
    } else {
        lprnet::FeatureMap feature;
        if (a.features == "moments") {
            feature = lprnet::analytic_moment_feature(a.moment_order);
        } else {
            const auto records = lprnet::load_checkpoint(a.checkpoint);
            if (records.empty()) throw lprnet::IntegrityError("empty checkpoint: " + a.checkpoint);
            if (records.front().dtype == 0) {
                model_f = lprnet::init_model<float>(rc.network, 0);
                lprnet::load_model_params(model_f, records);
                feature = lprnet::learned_feature(model_f, a.seed);
            } else {
                model_d = lprnet::init_model<double>(rc.network, 0);
                lprnet::load_model_params(model_d, records);
                feature = lprnet::learned_feature(model_d, a.seed);
            }
        }
        result = lprnet::iclk_register(source, target, feature, reg);
    }

    const double rmse_before = lprnet::rmse_nn(source, target);
    const double rmse_after =
        lprnet::rmse_nn(lprnet::apply_transform(result.transform, source), target);

    const std::string transform_text = lprnet::transform_to_text(result.transform);
    if (a.out.empty()) {
        std::cout << transform_text;
        if (transform_text.empty() || transform_text.back() != '\n') std::cout << "\n";
    } else {
        write_text_file(a.out, transform_text);
    }
    const json diag = registration_diagnostics(result, rmse_before, rmse_after);
    if (!a.report.empty()) write_text_file(a.report, diag.dump(2) + "\n");

    std::cout << (result.converged ? "converged" : "did not converge") << " after "
              << result.iterations << " iterations; rmse_nn " << rmse_before << " -> "
              << rmse_after << "\n";
    if (!a.out.empty()) std::cout << "transform: " << a.out << "\n";
    return result.converged ? kExitSuccess : kExitNotConverged;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateArgs {
    std::string manifest;
    std::string transforms;
    std::vector<std::string> metrics = {"rmse_nn", "rmse_t", "dsm"};
    double cell = 1.0;
    bool squared = false;
    std::string out;
};

int cmd_evaluate(const EvaluateArgs& a) {
    for (const auto& m : a.metrics)
        if (m != "rmse_nn" && m != "rmse_t" && m != "dsm")
            throw std::invalid_argument("unknown metric \"" + m +
                                        "\" (expected rmse_nn, rmse_t, dsm)");
    const bool want = true;
    const bool want_nn = std::count(a.metrics.begin(), a.metrics.end(), "rmse_nn") > 0;
    const bool want_t = std::count(a.metrics.begin(), a.metrics.end(), "rmse_t") > 0;
    const bool want_dsm = std::count(a.metrics.begin(), a.metrics.end(), "dsm") > 0;
    (void)want;

    const auto entries = lprnet::load_pair_manifest(a.manifest);
    std::ostringstream args_key;
    args_key << a.manifest << "|" << a.transforms << "|" << a.cell << "|" << a.squared;
    const std::string hash = lprnet::config_fingerprint(args_key.str());

    std::vector<std::string> lines(entries.size());
    std::vector<double> frobenius;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "pair_%04zu", i);
        const fs::path tpath = fs::path(a.transforms) / (std::string(name) + ".txt");
        if (!fs::exists(tpath)) throw lprnet::IoError("missing transform: " + tpath.string());
        const lprnet::RigidTransform est = lprnet::transform_from_text(slurp(tpath.string()));

        const lprnet::PointCloud source = load_cloud(entries[i].source_path);
        const lprnet::PointCloud target = load_cloud(entries[i].target_path);
        const lprnet::PointCloud registered = lprnet::apply_transform(est, source);

        lprnet::EvalReport report;
        report.pair_id = name;
        report.method_id = "external";
        report.config_hash = hash;
        if (want_nn) report.rmse_nn = lprnet::rmse_nn(registered, target);
        if (want_t) {
            report.rmse_t = lprnet::rmse_t(est, entries[i].gt, a.squared);
            frobenius.push_back(lprnet::transform_frobenius(est, entries[i].gt));
        }
        if (want_dsm) report.dsm_mean_abs_diff = lprnet::dsm_diff(registered, target, a.cell);
        lines[i] = lprnet::eval_report_json(report);
    }

    std::ostringstream body;
    for (const auto& line : lines) body << line << "\n";
    if (a.out.empty()) {
        std::cout << body.str();
    } else {
        write_text_file(a.out, body.str());
    }
    if (want_t && !frobenius.empty())
        std::cerr << "rmse_t over " << frobenius.size()
                  << " pairs: " << lprnet::rmse_t_set(frobenius, a.squared) << "\n";
    return kExitSuccess;
}

// ---------------------------------------------------------------------------
// filter-ground

struct FilterGroundArgs {
    std::string in;
    std::string out;
    double cell = 1.0;
    double threshold = 0.3;
};

int cmd_filter_ground(const FilterGroundArgs& a) {
    const lprnet::PointCloud cloud = load_cloud(a.in);
    const lprnet::PointCloud flagged = lprnet::ground_filter(cloud, a.cell, a.threshold);

    std::size_t ground = 0;
    std::ostringstream body;
    for (std::size_t i = 0; i < flagged.points.size(); ++i) {
        const auto& p = flagged.points[i];
        const int flag = flagged.ground_flag[i] ? 1 : 0;
        ground += static_cast<std::size_t>(flag);
        body << fmt17(p.x()) << " " << fmt17(p.y()) << " " << fmt17(p.z()) << " " << flag << "\n";
    }
    write_text_file(a.out, body.str());
    std::cout << "ground " << ground << " / non-ground " << (flagged.points.size() - ground)
              << " (fraction " << double(ground) / double(std::max<std::size_t>(1, flagged.points.size()))
              << ")\nwrote " << a.out << "\n";
    return kExitSuccess;
}

// ---------------------------------------------------------------------------
// info

struct InfoArgs {
    std::string in;
};

int cmd_info(const InfoArgs& a) {
    const lprnet::PointCloud cloud = load_cloud(a.in);
    std::cout << "points: " << cloud.points.size() << "\n";
    if (cloud.points.empty()) return kExitSuccess;

    Eigen::Vector3d lo = cloud.points.front(), hi = cloud.points.front();
    for (const auto& p : cloud.points) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    const char* axis = "xyz";
    for (int k = 0; k < 3; ++k)
        std::cout << axis[k] << ": [" << fmt17(lo[k]) << ", " << fmt17(hi[k]) << "]\n";

    const Eigen::Vector3d extent = hi - lo;
    const double area = extent.x() * extent.y();
    if (area > 0)
        std::cout << "density: " << double(cloud.points.size()) / area << " points / unit^2\n";
    else
        std::cout << "density: n/a (degenerate horizontal extent)\n";
    if (!cloud.source_label.empty()) std::cout << "label: " << cloud.source_label << "\n";
    if (cloud.has_ground_flags()) {
        const auto ground =
            std::count(cloud.ground_flag.begin(), cloud.ground_flag.end(), std::uint8_t(1));
        std::cout << "ground flags: " << ground << " ground / "
                  << cloud.points.size() - std::size_t(ground) << " non-ground\n";
    }
    return kExitSuccess;
}

// ---------------------------------------------------------------------------
// ablate

struct AblateArgs {
    std::string manifest;
    std::string checkpoints;
    std::string out = "ablation";
    std::string config;
};

int cmd_ablate(const AblateArgs& a) {
    const lprnet::RunConfig rc = load_optional_config(a.config);
    const auto variants = lprnet::standard_ablation_variants(rc.network, a.checkpoints);
    const lprnet::AblationTable table =
        lprnet::run_ablation_suite(variants, a.manifest, rc.registration);

    const std::string csv = lprnet::ablation_csv(table);
    write_text_file(a.out + ".csv", csv);
    write_text_file(a.out + ".txt", lprnet::ablation_plot_text(table));
    std::cout << csv << "wrote " << a.out << ".csv and " << a.out << ".txt\n";
    return kExitSuccess;
}

}  // namespace

int main(int argc, char** argv) {
    lprnet::init_threading();

    CLI::App app{"Self-supervised point-cloud registration pipeline"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Expanded help for every subcommand");

    GenSimArgs gs;
    CLI::App* gen = app.add_subcommand("gen-sim", "Generate a synthetic registration pair set");
    gen->add_option("--base", gs.base, "Base scene name")->capture_default_str();
    gen->add_option("--n", gs.n, "Points per base cloud")->capture_default_str();
    gen->add_option("--pairs", gs.pairs, "Number of pairs")->capture_default_str();
    gen->add_option("--sigma", gs.sigma, "Gaussian noise stddev")->capture_default_str();
    gen->add_option("--occlusion", gs.occlusion, "Occlusion rate in [0,1)")->capture_default_str();
    gen->add_option("--rot-max", gs.rot_max, "Max rotation angle (degrees)")->capture_default_str();
    gen->add_option("--trans-max", gs.trans_max, "Max translation norm")->capture_default_str();
    gen->add_option("--seed", gs.seed, "Base seed")->capture_default_str();
    gen->add_option("--out", gs.out, "Output directory")->required();
    gen->add_flag("--uniform-dropout", gs.uniform_dropout,
                  "Drop points uniformly instead of a contiguous region");
    gen->add_flag("--vertical-axis", gs.vertical_axis, "Rotate about the vertical axis only");

    TrainArgs tr;
    CLI::App* train = app.add_subcommand("train", "Train the masked-autoencoder feature network");
    train->add_option("--config", tr.config, "Run-config JSON file");
    train->add_option("--data", tr.data, "Training cloud files (.xyz or .ply)");
    train->add_option("--out", tr.out, "Checkpoint output path")->capture_default_str();
    train->add_option("--log", tr.log, "Loss log path (default: <out>.log.jsonl)");
    train->add_flag("--desk-scale", tr.desk_scale, "Small network preset (default)");
    train->add_flag("--paper-scale", tr.paper_scale, "Full-size network preset");
    train->add_option("--epochs", tr.epochs, "Override epoch count");
    train->add_option("--seed", tr.seed, "Override training seed");
    train->add_option("--resume", tr.resume, "Resume from a training-state file");
    train->add_option("--stop-after", tr.stop_after, "Stop after this many epochs this run");

    RegisterArgs rg;
    CLI::App* reg = app.add_subcommand("register", "Align a source cloud onto a target cloud");
    reg->add_option("--source", rg.source, "Source cloud")->required();
    reg->add_option("--target", rg.target, "Target cloud")->required();
    reg->add_option("--features", rg.features, "Feature map")
        ->check(CLI::IsMember({"learned", "moments", "icp"}))
        ->capture_default_str();
    reg->add_option("--checkpoint", rg.checkpoint, "Model checkpoint (learned features)");
    reg->add_option("--moment-order", rg.moment_order, "Moment feature order (1-3)")
        ->capture_default_str();
    reg->add_option("--out", rg.out, "Transform output path (default: stdout)");
    reg->add_option("--report", rg.report, "JSON diagnostics output path");
    reg->add_option("--crop", rg.crop, "Horizontal crop box xmin,ymin,xmax,ymax")
        ->delimiter(',')
        ->expected(4);
    reg->add_option("--seed", rg.seed, "Patch sampling seed (learned features)")
        ->capture_default_str();
    reg->add_option("--config", rg.config, "Run-config JSON file");
    reg->add_option("--max-iter", rg.max_iterations, "Override iteration cap");
    reg->add_option("--tol", rg.tolerance, "Override convergence tolerance");

    EvaluateArgs ev;
    CLI::App* eval = app.add_subcommand("evaluate", "Score estimated transforms against a pair set");
    eval->add_option("--pair-manifest", ev.manifest, "Pair-set manifest JSON")->required();
    eval->add_option("--transforms", ev.transforms, "Directory of pair_NNNN.txt transforms")
        ->required();
    eval->add_option("--metrics", ev.metrics, "Metric subset")->delimiter(',');
    eval->add_option("--cell", ev.cell, "Surface-grid cell size")->capture_default_str();
    eval->add_flag("--squared-rmse-t", ev.squared, "Square the transform error inside the mean");
    eval->add_option("--out", ev.out, "Write the JSON-lines report here instead of stdout");

    FilterGroundArgs fg;
    CLI::App* filt = app.add_subcommand("filter-ground", "Flag ground points by grid height");
    filt->add_option("--in", fg.in, "Input cloud")->required();
    filt->add_option("--out", fg.out, "Flagged output (x y z flag per line)")->required();
    filt->add_option("--cell", fg.cell, "Grid cell size")->capture_default_str();
    filt->add_option("--threshold", fg.threshold, "Height-above-ground threshold")
        ->capture_default_str();

    InfoArgs in;
    CLI::App* info = app.add_subcommand("info", "Print cloud size, bounds, density");
    info->add_option("--in", in.in, "Input cloud")->required();

    AblateArgs ab;
    CLI::App* abl = app.add_subcommand("ablate", "Compare feature-network variants on a pair set");
    abl->add_option("--manifest", ab.manifest, "Pair-set manifest JSON")->required();
    abl->add_option("--checkpoints", ab.checkpoints, "Directory of <variant>.ckpt files")
        ->required();
    abl->add_option("--out", ab.out, "Output prefix for .csv and .txt")->capture_default_str();
    abl->add_option("--config", ab.config, "Run-config JSON file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    if (gen->parsed()) return run_guarded([&] { return cmd_gen_sim(gs); });
    if (train->parsed()) return run_guarded([&] { return cmd_train(tr); });
    if (reg->parsed()) return run_guarded([&] { return cmd_register(rg); });
    if (eval->parsed()) return run_guarded([&] { return cmd_evaluate(ev); });
    if (filt->parsed()) return run_guarded([&] { return cmd_filter_ground(fg); });
    if (info->parsed()) return run_guarded([&] { return cmd_info(in); });
    if (abl->parsed()) return run_guarded([&] { return cmd_ablate(ab); });
    return kExitUsage;
}
