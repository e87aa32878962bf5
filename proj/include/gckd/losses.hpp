#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "gckd/distillation.hpp"

namespace gckd {

struct LossConfig {
    double tau = 0.07;
    double delta = 0.8;  // positive-pair similarity threshold
    double lambda1 = 0.5;
    double lambda2 = 0.5;
    double lambda3 = 1.0;

    void validate() const;
};

// Soft-target contrastive loss over the target queues, mean-reduced over all
// active row instances (B per active direction). Gradients flow into the
// student features only; queue snapshots and targets are constants.
struct CdItcResult {
    double value = 0.0;
    Matrix d_img;  // dL/d f_TI (unscaled by lambda)
    Matrix d_txt;  // dL/d f_TT
    bool i2t_active = false;
    bool t2i_active = false;
    double target_entropy = 0.0;  // mean entropy of the target rows used
};

CdItcResult cd_itc(const Matrix& f_ti, const Matrix& f_tt, const PseudoTargets& targets,
                   const Matrix& q_tt, const Matrix& q_ti, const LossConfig& cfg);

// All (image_idx, queue_idx) pairs whose teacher cosine similarity exceeds
// delta. May be empty.
std::vector<std::pair<std::size_t, std::size_t>> select_positives(
    const Matrix& teacher_img, const Matrix& q_tt, double delta);

// Per target image, the single source-text row of maximal cosine similarity
// (ties -> lowest index). Empty source batch -> empty list (skip signal).
std::vector<std::pair<std::size_t, std::size_t>> mine_hard_negatives(
    const Matrix& f_ti, const Matrix& f_st);

// Binary matching loss on concatenated pair features. Positive pairs take the
// text side from the queue snapshot (constant); negatives take it from the
// live source-text batch.
struct CdItmResult {
    double value = 0.0;
    Matrix d_img;      // dL/d f_TI
    Matrix d_src_txt;  // dL/d f_ST (negative pairs only)
    std::vector<AffineLayer> head_grads;
    std::size_t n_pos = 0;
    std::size_t n_neg = 0;
    bool active = false;
};

CdItmResult cd_itm(const std::vector<std::pair<std::size_t, std::size_t>>& positives,
                   const std::vector<std::pair<std::size_t, std::size_t>>& negatives,
                   const std::vector<AffineLayer>& head, const Matrix& f_ti,
                   const Matrix& q_tt, const Matrix& f_st);

struct LossParts {
    std::optional<double> cd_itc;  // nullopt = skipped
    std::optional<double> cd_itm;
    double aux = 0.0;  // auxiliary slot (external term, defaults to zero)
    std::size_t positives = 0;
    std::size_t negatives = 0;
};

struct LossReport {
    double cd_itc = 0.0;
    double cd_itm = 0.0;
    double aux = 0.0;
    double total = 0.0;
    std::size_t positives = 0;
    std::size_t negatives = 0;
    std::size_t skipped_terms = 0;
};

LossReport total_loss(const LossParts& parts, const LossConfig& cfg);

}  // namespace gckd
