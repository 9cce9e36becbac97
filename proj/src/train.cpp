#include "vsrt/train.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "vsrt/checkpoint.hpp"
#include "vsrt/errors.hpp"

namespace vsrt {

void Adam::step(ParamStore& params, float lr) {
    const auto& entries = params.all();
    if (slots_.size() != entries.size()) {
        slots_.clear();
        for (const auto& e : entries) {
            slots_.push_back({std::vector<float>(e.tensor.size(), 0.0f),
                              std::vector<float>(e.tensor.size(), 0.0f)});
        }
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(double(beta1_), double(t_));
    const double bc2 = 1.0 - std::pow(double(beta2_), double(t_));
    for (std::size_t p = 0; p < entries.size(); ++p) {
        Tensor t = entries[p].tensor; // shared handle
        if (!t.has_grad()) continue;
        float* w = t.data();
        const float* g = t.grad_data();
        float* m = slots_[p].m.data();
        float* v = slots_[p].v.data();
        for (std::size_t i = 0; i < t.size(); ++i) {
            m[i] = beta1_ * m[i] + (1.0f - beta1_) * g[i];
            v[i] = beta2_ * v[i] + (1.0f - beta2_) * g[i] * g[i];
            const double mhat = double(m[i]) / bc1;
            const double vhat = double(v[i]) / bc2;
            w[i] = float(double(w[i]) - double(lr) * mhat / (std::sqrt(vhat) + double(eps_)));
        }
    }
}

double cosine_restart_lr(long step, const TrainConfig& cfg) {
    long s = step;
    for (std::size_t i = 0; i < cfg.periods.size(); ++i) {
        const long p = cfg.periods[i];
        if (s < p) {
            const double w = cfg.restart_weights[i];
            return double(cfg.lr_min) +
                   w * (double(cfg.lr0) - double(cfg.lr_min)) * (1.0 + std::cos(M_PI * double(s) / double(p))) / 2.0;
        }
        s -= p;
    }
    return double(cfg.lr_min);
}

EvalReport evaluate(const VsrTransformer& model, const Dataset& ds, const std::string& mode,
                    const std::string& ablation) {
    const auto t0 = std::chrono::steady_clock::now();
    EvalReport r;
    r.mode = mode;
    double mp = 0, ms = 0, bp = 0, bs = 0;
    for (const auto& seq : ds.sequences) {
        SequenceEval se;
        FlowPair flows = model.flows_for(seq.lr, seq.has_gt_flow ? &seq.gt_flow : nullptr, nullptr);
        Tensor sr = model.super_resolve(seq.lr, flows, ablation);
        PsnrResult pm = psnr(sr, seq.hr, mode);
        se.model_psnr = pm.db;
        se.model_psnr_inf = pm.infinite;
        se.model_ssim = ssim(sr, seq.hr, mode);
        Tensor bic = ops::clamp01(bicubic_resample(seq.lr, double(seq.scale)));
        PsnrResult pb = psnr(bic, seq.hr, mode);
        se.bicubic_psnr = pb.db;
        se.bicubic_psnr_inf = pb.infinite;
        se.bicubic_ssim = ssim(bic, seq.hr, mode);
        r.sequences.push_back(se);
        mp += se.model_psnr;
        ms += se.model_ssim;
        bp += se.bicubic_psnr;
        bs += se.bicubic_ssim;
    }
    const double n = double(std::max<std::size_t>(1, r.sequences.size()));
    r.avg_model_psnr = mp / n;
    r.avg_model_ssim = ms / n;
    r.avg_bicubic_psnr = bp / n;
    r.avg_bicubic_ssim = bs / n;
    r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

void write_eval_csv(const EvalReport& r, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write eval report: " + path);
    char buf[256];
    out << "sequence,method,psnr_db,psnr_capped,ssim\n";
    for (std::size_t i = 0; i < r.sequences.size(); ++i) {
        const auto& s = r.sequences[i];
        std::snprintf(buf, sizeof buf, "%zu,model,%.9g,%d,%.9g\n", i, s.model_psnr,
                      s.model_psnr_inf ? 1 : 0, s.model_ssim);
        out << buf;
        std::snprintf(buf, sizeof buf, "%zu,bicubic,%.9g,%d,%.9g\n", i, s.bicubic_psnr,
                      s.bicubic_psnr_inf ? 1 : 0, s.bicubic_ssim);
        out << buf;
    }
    std::snprintf(buf, sizeof buf, "average,model,%.9g,0,%.9g\n", r.avg_model_psnr, r.avg_model_ssim);
    out << buf;
    std::snprintf(buf, sizeof buf, "average,bicubic,%.9g,0,%.9g\n", r.avg_bicubic_psnr,
                  r.avg_bicubic_ssim);
    out << buf;
}

TrainResult train(VsrTransformer& model, const Dataset& train_ds, const Dataset* val_ds,
                  const TrainConfig& cfg, const std::string& out_dir) {
    namespace fs = std::filesystem;
    if (train_ds.sequences.empty()) throw ConfigError("training dataset is empty");
    fs::create_directories(out_dir);
    std::ofstream log(out_dir + "/log.csv");
    if (!log) throw IoError("cannot write " + out_dir + "/log.csv");
    log << "step,lr,loss,psnr,ssim\n";

    Adam adam(cfg.beta1, cfg.beta2, cfg.adam_eps);
    Rng master(cfg.seed);
    TrainResult result;
    double best_psnr = -1.0;
    char buf[256];

    const int crop = std::min<int>(cfg.crop, int(train_ds.sequences[0].lr.dim(2)));
    for (long it = 0; it < cfg.iterations; ++it) {
        const double lr = cosine_restart_lr(it, cfg);
        Rng rng = master.child(std::uint64_t(it));
        model.params().zero_grads();
        Tape tape;
        Tensor total;
        for (int b = 0; b < cfg.batch; ++b) {
            const auto& seq = train_ds.sequences[rng.uniform_int(train_ds.sequences.size())];
            SamplePair s = crop_lr_patches_random(seq, crop, rng);
            if (cfg.augment) s = augment(s, rng);
            FlowPair flows = model.flows_for(s.lr, s.has_gt_flow ? &s.gt_flow : nullptr, &tape);
            Tensor out = model.forward(s.lr, flows, &tape, cfg.ablation);
            Tensor loss = ops::charbonnier(out, s.hr, cfg.charbonnier_eps, &tape);
            total = total.defined() ? ops::add(total, loss, &tape) : loss;
        }
        Tensor batch_loss = ops::scale(total, 1.0f / float(cfg.batch), &tape);
        const double loss_v = batch_loss.item_f64();
        if (!std::isfinite(loss_v)) {
            result.nan_abort = true;
            result.steps = it;
            save_checkpoint(model, out_dir + "/checkpoint_last");
            return result;
        }
        tape.backward(batch_loss);
        adam.step(model.params(), float(lr));
        result.losses.push_back(loss_v);
        result.last_loss = loss_v;

        const bool eval_now = val_ds && ((it + 1) % cfg.eval_every == 0 || it + 1 == cfg.iterations);
        if (eval_now) {
            EvalReport er = evaluate(model, *val_ds, "rgb", cfg.ablation);
            std::snprintf(buf, sizeof buf, "%ld,%.9g,%.9g,%.9g,%.9g\n", it, lr, loss_v,
                          er.avg_model_psnr, er.avg_model_ssim);
            log << buf;
            if (er.avg_model_psnr > best_psnr) {
                best_psnr = er.avg_model_psnr;
                save_checkpoint(model, out_dir + "/checkpoint_best");
            }
        } else {
            std::snprintf(buf, sizeof buf, "%ld,%.9g,%.9g,,\n", it, lr, loss_v);
            log << buf;
        }
    }
    result.steps = cfg.iterations;
    result.best_psnr = best_psnr;
    save_checkpoint(model, out_dir + "/checkpoint_last");
    if (!val_ds) save_checkpoint(model, out_dir + "/checkpoint_best");
    return result;
}

} // namespace vsrt
