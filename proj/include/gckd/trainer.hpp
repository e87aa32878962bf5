#pragma once

#include <functional>
#include <string>
#include <string_view>

#include "gckd/losses.hpp"
#include "gckd/memory_bank.hpp"
#include "gckd/rng.hpp"

namespace gckd {

enum class AblationMode { Baseline, Cmkd, CmkdGmp };
const char* to_string(AblationMode m);
AblationMode parse_mode(std::string_view s);

struct TrainConfig {
    std::size_t batch_size = 4;
    double lr = 1e-5;
    double weight_decay = 0.01;
    std::size_t epochs = 4;  // adaptation epochs, counted over the target set
    std::size_t warmup_epochs = 4;
    double grad_clip = 0.0;  // 0 = off
    std::uint64_t seed = 1;
    double ema_momentum = 0.999;
    std::size_t knn_k = 10;
    std::size_t memory_capacity = 256;
    std::size_t memory_min_fill = 0;  // 0 -> capacity / 4
    ModelDims dims;
    LossConfig loss;
    std::string graph_dump_dir;  // per-iteration edge-list dumps; empty = off

    void validate() const;
    std::size_t min_fill() const {
        return memory_min_fill ? memory_min_fill : memory_capacity / 4;
    }
};

struct AdamWState {
    Vector m, v;
    std::uint64_t step = 0;
};

struct TrainState {
    TeacherStudentPair pair;
    std::vector<MemoryBank> banks;  // src_img, tgt_img, src_txt, tgt_txt
    AdamWState opt;
    std::uint64_t iteration = 0;
    Rng rng;

    MemoryBank& bank(Domain d, Modality m);
    const MemoryBank& bank(Domain d, Modality m) const;
};

TrainState init_train_state(const TrainConfig& cfg);

// Target-domain batches carry raw rows and a modality tag only; there is no
// identity channel on this type.
struct UnlabeledBatch {
    Matrix raw;
    Modality modality = Modality::Image;
};

// Aligned source pairs: image row i matches text row i.
struct PairedBatch {
    Matrix image_raw;
    Matrix text_raw;
};

UnlabeledBatch unlabeled_batch(const std::vector<Sample>& set,
                               std::span<const std::size_t> idx);
PairedBatch paired_batch(const std::vector<Sample>& images,
                         const std::vector<Sample>& texts,
                         std::span<const std::size_t> idx);

struct MetricsRecord {
    std::string phase;  // "warmup" | "adapt"
    std::uint64_t iteration = 0;
    double lr = 0.0;
    LossReport report;
};
using MetricsSink = std::function<void(const MetricsRecord&)>;

double cosine_lr(double base, std::size_t step_index, std::size_t total_steps);

void adamw_step(ModelParams& params, const ModelParams& grads, AdamWState& opt,
                double lr, double weight_decay, double grad_clip);

// In-batch symmetric contrastive warm-up step on paired source data.
double warmup_step(TrainState& state, const PairedBatch& batch, const TrainConfig& cfg,
                   double lr_now);
void warmup(TrainState& state, const std::vector<Sample>& source_images,
            const std::vector<Sample>& source_texts, const TrainConfig& cfg,
            const MetricsSink& sink = nullptr);

// Frozen per-step structure: queue snapshots, graph topologies, teacher
// targets and pair selections. The differentiable path (eval_step) is a pure
// function of the student parameters given a plan.
struct StepPlan {
    Matrix q_si, q_ti, q_st, q_tt;  // gated snapshots (empty when below min fill)
    bool img_gmp = false;
    bool txt_gmp = false;
    GraphTopology img_topo, txt_topo;
    PseudoTargets targets;
    Matrix teacher_img, teacher_txt;  // EMA-teacher target features
    std::vector<std::pair<std::size_t, std::size_t>> positives;
    std::vector<std::pair<std::size_t, std::size_t>> negatives;
};

StepPlan make_step_plan(const TrainState& state, const PairedBatch& source,
                        const UnlabeledBatch& target_images,
                        const UnlabeledBatch& target_texts, const TrainConfig& cfg,
                        bool use_gmp);

struct StepEval {
    LossReport report;
    ModelParams grads;    // populated when want_grads
    Matrix f_si, f_st;    // student source features (memory pushes)
};

StepEval eval_step(const ModelParams& student, const StepPlan& plan,
                   const PairedBatch& source, const UnlabeledBatch& target_images,
                   const UnlabeledBatch& target_texts, const TrainConfig& cfg,
                   bool want_grads);

LossReport adapt_step(TrainState& state, const PairedBatch& source,
                      const UnlabeledBatch& target_images,
                      const UnlabeledBatch& target_texts, const TrainConfig& cfg,
                      bool use_gmp, double lr_now);

void adapt(TrainState& state, const std::vector<Sample>& target_images,
           const std::vector<Sample>& target_texts,
           const std::vector<Sample>& source_images,
           const std::vector<Sample>& source_texts, const TrainConfig& cfg,
           AblationMode mode, const MetricsSink& sink = nullptr);

struct GradCheckOptions {
    std::size_t samples = 200;
    double step = 1e-5;
    double tolerance = 1e-4;
    std::uint64_t seed = 0;
    double corruption = 0.0;  // test hook: scales one analytic gradient entry
};

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::size_t checked = 0;
    std::size_t worst_flat_index = 0;
    bool passed = false;
};

GradCheckReport grad_check(const TrainState& state, const PairedBatch& source,
                           const UnlabeledBatch& target_images,
                           const UnlabeledBatch& target_texts, const TrainConfig& cfg,
                           bool use_gmp, const GradCheckOptions& opts);

}  // namespace gckd
