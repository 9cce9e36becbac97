// vsrt: video super-resolution transformer toolkit.
//
// Subcommands: gen-data, train, super-resolve, eval, theory, gradcheck.
// Exit codes: 0 success, 2 usage/config error, 3 data error, 4 numeric abort.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "vsrt/checkpoint.hpp"
#include "vsrt/config.hpp"
#include "vsrt/data.hpp"
#include "vsrt/errors.hpp"
#include "vsrt/gradcheck.hpp"
#include "vsrt/metrics.hpp"
#include "vsrt/model.hpp"
#include "vsrt/theory.hpp"
#include "vsrt/train.hpp"

namespace fs = std::filesystem;
using namespace vsrt;

namespace {

ConfigMap make_config(const std::string& config_path, const std::vector<std::string>& overrides) {
    ConfigMap m = config_path.empty() ? ConfigMap() : ConfigMap::from_file(config_path);
    for (const auto& kv : overrides) m.apply_override(kv);
    return m;
}

std::string config_help() {
    std::string s = "Config keys (key=value overrides):\n";
    for (const auto& e : config_registry()) {
        s += "  ";
        s += e.key;
        s += " (default ";
        s += e.def;
        s += "): ";
        s += e.help;
        s += "\n";
    }
    return s;
}

int run_gen_data(const std::string& config, const std::vector<std::string>& overrides,
                 const std::string& out) {
    ConfigMap m = make_config(config, overrides);
    DataConfig cfg = DataConfig::from_map(m);
    Dataset ds = generate_dataset(cfg);
    save_dataset(ds, out);
    std::printf("%s/manifest.txt\n", out.c_str());
    return 0;
}

int run_train(const std::string& config, const std::vector<std::string>& overrides,
              const std::string& data_dir, const std::string& val_dir, const std::string& out) {
    ConfigMap m = make_config(config, overrides);
    ModelConfig mc = ModelConfig::from_map(m);
    TrainConfig tc = TrainConfig::from_map(m);
    if (!fs::exists(data_dir + "/manifest.txt")) {
        throw IoError("training dataset not found: " + data_dir);
    }
    Dataset train_ds = load_dataset(data_dir);
    Dataset val_ds;
    const bool has_val = !val_dir.empty();
    if (has_val) val_ds = load_dataset(val_dir);

    VsrTransformer model(mc);
    Rng rng(tc.seed);
    model.init_params(rng);
    fs::create_directories(out);
    m.save(out + "/train_config.txt");
    TrainResult tr = train(model, train_ds, has_val ? &val_ds : nullptr, tc, out);
    if (tr.nan_abort) {
        std::fprintf(stderr, "NaN loss at step %ld; last-good checkpoint retained\n", tr.steps);
        return 4;
    }
    std::printf("trained %ld steps, final loss %.6g, best val PSNR %.4f dB\n", tr.steps, tr.last_loss,
                tr.best_psnr);
    return 0;
}

std::vector<std::string> sorted_ppm_files(const std::string& dir) {
    std::vector<std::string> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.path().extension() == ".ppm") files.push_back(e.path().string());
    }
    std::sort(files.begin(), files.end());
    return files;
}

int run_super_resolve(const std::string& ckpt, const std::string& frames_dir, const std::string& out,
                      const std::string& flow_override) {
    ModelConfig mc = checkpoint_config(ckpt);
    if (!flow_override.empty()) mc.flow_estimator = flow_override;
    if (mc.flow_estimator == "ground_truth") {
        throw UnsupportedError(
            "ground-truth flows are unavailable for plain frame directories; pass --flow zero or "
            "--flow spynet");
    }
    VsrTransformer model(mc);
    load_checkpoint(model, ckpt);
    const auto files = sorted_ppm_files(frames_dir);
    if (files.empty()) throw IoError("no PPM frames in " + frames_dir);
    if (files.size() % std::size_t(mc.frames) != 0) {
        throw ShapeError("frame count " + std::to_string(files.size()) +
                         " is not a multiple of the model window " + std::to_string(mc.frames));
    }
    fs::create_directories(out);
    for (std::size_t w = 0; w < files.size(); w += std::size_t(mc.frames)) {
        std::vector<Tensor> frames;
        for (int t = 0; t < mc.frames; ++t) frames.push_back(read_ppm(files[w + std::size_t(t)]));
        Tensor lr = ops::stack_frames(frames);
        FlowPair flows = model.flows_for(lr, nullptr, nullptr);
        Tensor hr = model.super_resolve(lr, flows);
        for (int t = 0; t < mc.frames; ++t) {
            const std::string name = fs::path(files[w + std::size_t(t)]).stem().string();
            write_ppm(ops::slice_frame(hr, t), out + "/" + name + "_sr.ppm");
        }
    }
    std::printf("%s\n", out.c_str());
    return 0;
}

int run_eval(const std::string& ckpt, const std::string& data_dir, const std::string& out,
             const std::string& channels, const std::string& ablation) {
    ModelConfig mc = checkpoint_config(ckpt);
    VsrTransformer model(mc);
    load_checkpoint(model, ckpt);
    Dataset ds = load_dataset(data_dir);
    EvalReport r = evaluate(model, ds, channels, ablation);
    fs::create_directories(out);
    write_eval_csv(r, out + "/eval.csv");
    std::fprintf(stderr, "eval wall time: %.3fs\n", r.wall_seconds);
    std::printf("model %.4f dB / %.5f ssim; bicubic %.4f dB / %.5f ssim (%s)\n", r.avg_model_psnr,
                r.avg_model_ssim, r.avg_bicubic_psnr, r.avg_bicubic_ssim, channels.c_str());
    return 0;
}

int run_theory(const std::string& grid_path, const std::string& out) {
    theory::TheoryGrid grid =
        grid_path.empty() ? theory::TheoryGrid::defaults() : theory::TheoryGrid::from_file(grid_path);
    theory::run_theory(grid, out);
    std::printf("%s/gradnorm.csv %s/lemma3.csv %s/learn.csv\n", out.c_str(), out.c_str(), out.c_str());
    return 0;
}

int run_gradcheck(const std::string& scope, std::uint64_t seed) {
    std::vector<GradCheckRow> rows;
    if (scope == "ops") {
        rows = gradcheck_ops(seed);
    } else if (scope == "model") {
        rows = gradcheck_model(seed);
    } else {
        throw ConfigError("gradcheck scope must be ops|model");
    }
    bool all_pass = true;
    for (const auto& r : rows) {
        std::printf("%-28s %12.4e %s\n", r.name.c_str(), r.max_rel_err, r.pass ? "pass" : "FAIL");
        all_pass = all_pass && r.pass;
    }
    std::printf("%zu checks, %s\n", rows.size(), all_pass ? "all pass" : "FAILURES");
    return all_pass ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"video super-resolution transformer toolkit"};
    app.require_subcommand(1);
    app.footer(config_help());

    std::string config, out = "out", data_dir, val_dir, ckpt, frames_dir, grid;
    std::string channels = "rgb", ablation = "full", flow_override, scope;
    std::uint64_t seed = 0;
    std::vector<std::string> overrides;

    auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
    gen->add_option("--config", config, "config file (key = value lines)");
    gen->add_option("--set", overrides, "config overrides key=value")->take_all();
    gen->add_option("--out", out, "output directory")->required();

    auto* tr = app.add_subcommand("train", "train a model");
    tr->add_option("--config", config, "config file");
    tr->add_option("--set", overrides, "config overrides key=value")->take_all();
    tr->add_option("--data", data_dir, "training dataset directory")->required();
    tr->add_option("--val", val_dir, "validation dataset directory");
    tr->add_option("--out", out, "output directory")->required();

    auto* sr = app.add_subcommand("super-resolve", "upscale a directory of PPM frames");
    sr->add_option("--checkpoint", ckpt, "checkpoint directory")->required();
    sr->add_option("--frames", frames_dir, "directory of LR PPM frames")->required();
    sr->add_option("--flow", flow_override, "flow estimator override: zero|spynet");
    sr->add_option("--out", out, "output directory")->required();

    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
    ev->add_option("--checkpoint", ckpt, "checkpoint directory")->required();
    ev->add_option("--data", data_dir, "dataset directory")->required();
    ev->add_option("--channels", channels, "rgb|y");
    ev->add_option("--ablation", ablation, "forward-path ablation: full|no_stcsa|no_boff|no_flow");
    ev->add_option("--out", out, "output directory")->required();

    auto* th = app.add_subcommand("theory", "k-pattern learnability experiments");
    th->add_option("--grid", grid, "grid config file (defaults to the built-in grid)");
    th->add_option("--out", out, "output directory")->required();

    auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient checks");
    gc->add_option("--scope", scope, "ops|model")->required();
    gc->add_option("--seed", seed, "RNG seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return run_gen_data(config, overrides, out);
        if (tr->parsed()) return run_train(config, overrides, data_dir, val_dir, out);
        if (sr->parsed()) return run_super_resolve(ckpt, frames_dir, out, flow_override);
        if (ev->parsed()) return run_eval(ckpt, data_dir, out, channels, ablation);
        if (th->parsed()) return run_theory(grid, out);
        if (gc->parsed()) return run_gradcheck(scope, seed);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const UnsupportedError& e) {
        std::fprintf(stderr, "unsupported: %s\n", e.what());
        return 2;
    } catch (const NumericError& e) {
        std::fprintf(stderr, "numeric error: %s\n", e.what());
        return 4;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
    return 2;
}
