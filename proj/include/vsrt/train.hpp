#pragma once

#include <string>
#include <vector>

#include "vsrt/config.hpp"
#include "vsrt/data.hpp"
#include "vsrt/metrics.hpp"
#include "vsrt/model.hpp"

namespace vsrt {

// Bias-corrected Adam over a ParamStore, slots keyed by parameter order.
class Adam {
public:
    Adam(float beta1, float beta2, float eps) : beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(ParamStore& params, float lr);
    long steps_taken() const { return t_; }

private:
    struct Slot {
        std::vector<float> m, v;
    };
    float beta1_, beta2_, eps_;
    long t_ = 0;
    std::vector<Slot> slots_;
};

// Piecewise cosine annealing with warm restarts; holds lr_min past the end.
double cosine_restart_lr(long step, const TrainConfig& cfg);

struct SequenceEval {
    double model_psnr = 0.0;
    bool model_psnr_inf = false;
    double model_ssim = 0.0;
    double bicubic_psnr = 0.0;
    bool bicubic_psnr_inf = false;
    double bicubic_ssim = 0.0;
};

struct EvalReport {
    std::vector<SequenceEval> sequences;
    double avg_model_psnr = 0.0;
    double avg_model_ssim = 0.0;
    double avg_bicubic_psnr = 0.0;
    double avg_bicubic_ssim = 0.0;
    std::string mode = "rgb";
    double wall_seconds = 0.0; // reported on stderr, never in the CSV
};

EvalReport evaluate(const VsrTransformer& model, const Dataset& ds, const std::string& mode,
                    const std::string& ablation = "full");
void write_eval_csv(const EvalReport& r, const std::string& path);

struct TrainResult {
    long steps = 0;
    bool nan_abort = false;
    double last_loss = 0.0;
    double best_psnr = 0.0;
    std::vector<double> losses;
};

// Deterministic for a fixed seed at thread count 1. Writes log.csv,
// checkpoint_last/ and (when a validation set is given) checkpoint_best/
// under out_dir.
TrainResult train(VsrTransformer& model, const Dataset& train_ds, const Dataset* val_ds,
                  const TrainConfig& cfg, const std::string& out_dir);

} // namespace vsrt
