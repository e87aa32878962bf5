#include "gckd/losses.hpp"

#include <cmath>

#include "gckd/kernels.hpp"

namespace gckd {

void LossConfig::validate() const {
    if (tau <= 0.0) throw ConfigError("loss: tau must be positive");
    if (delta <= -1.0 || delta >= 1.0) throw ConfigError("loss: delta must be in (-1, 1)");
    if (lambda1 < 0.0 || lambda2 < 0.0 || lambda3 < 0.0)
        throw ConfigError("loss: lambdas must be non-negative");
}

namespace {

// One direction of the soft-target contrastive loss. Accumulates the value,
// entropy and per-feature gradients; weight = 1/instances of the reduction.
void itc_direction(const Matrix& feats, const Matrix& queue, const Matrix& targets,
                   double tau, double weight, double& value, double& entropy,
                   Matrix& d_feats) {
    if (targets.rows != feats.rows || targets.cols != queue.rows)
        throw UsageError("cd_itc: queue/target misalignment");
    Matrix logits = matmul_abt(feats, queue);  // B x C, unit rows -> cosine
    for (auto& v : logits.data) v /= tau;
    for (std::size_t i = 0; i < logits.rows; ++i) {
        double* p = logits.row(i);
        softmax_temp_in_place(p, logits.cols, 1.0);  // logits already tempered
        const double* s = targets.row(i);
        double ce = 0.0, h = 0.0;
        for (std::size_t q = 0; q < logits.cols; ++q) {
            if (s[q] > 0.0) {
                ce -= s[q] * std::log(p[q]);
                h -= s[q] * std::log(s[q]);
            }
        }
        value += weight * ce;
        entropy += weight * h;
        // d logits = weight * (p - s); d feats = d logits * queue / tau
        for (std::size_t q = 0; q < logits.cols; ++q) {
            const double coeff = weight * (p[q] - s[q]) / tau;
            kernels::axpy(coeff, queue.row(q), d_feats.row(i), d_feats.cols);
        }
    }
}

}  // namespace

CdItcResult cd_itc(const Matrix& f_ti, const Matrix& f_tt, const PseudoTargets& targets,
                   const Matrix& q_tt, const Matrix& q_ti, const LossConfig& cfg) {
    CdItcResult res;
    res.d_img = Matrix(f_ti.rows, f_ti.cols);
    res.d_txt = Matrix(f_tt.rows, f_tt.cols);
    res.i2t_active = targets.i2t.has_value() && q_tt.rows > 0;
    res.t2i_active = targets.t2i.has_value() && q_ti.rows > 0;
    const std::size_t instances = (res.i2t_active ? f_ti.rows : 0) +
                                  (res.t2i_active ? f_tt.rows : 0);
    if (instances == 0) return res;
    const double weight = 1.0 / static_cast<double>(instances);
    if (res.i2t_active)
        itc_direction(f_ti, q_tt, *targets.i2t, cfg.tau, weight, res.value,
                      res.target_entropy, res.d_img);
    if (res.t2i_active)
        itc_direction(f_tt, q_ti, *targets.t2i, cfg.tau, weight, res.value,
                      res.target_entropy, res.d_txt);
    return res;
}

std::vector<std::pair<std::size_t, std::size_t>> select_positives(
    const Matrix& teacher_img, const Matrix& q_tt, double delta) {
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    if (q_tt.rows == 0) return pairs;
    for (std::size_t i = 0; i < teacher_img.rows; ++i)
        for (std::size_t q = 0; q < q_tt.rows; ++q)
            if (cosine_sim(teacher_img.row_span(i), q_tt.row_span(q)) > delta)
                pairs.emplace_back(i, q);
    return pairs;
}

std::vector<std::pair<std::size_t, std::size_t>> mine_hard_negatives(
    const Matrix& f_ti, const Matrix& f_st) {
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    if (f_st.rows == 0) return pairs;
    for (std::size_t i = 0; i < f_ti.rows; ++i) {
        std::size_t best = 0;
        double best_sim = cosine_sim(f_ti.row_span(i), f_st.row_span(0));
        for (std::size_t j = 1; j < f_st.rows; ++j) {
            const double s = cosine_sim(f_ti.row_span(i), f_st.row_span(j));
            if (s > best_sim) {
                best_sim = s;
                best = j;
            }
        }
        pairs.emplace_back(i, best);
    }
    return pairs;
}

CdItmResult cd_itm(const std::vector<std::pair<std::size_t, std::size_t>>& positives,
                   const std::vector<std::pair<std::size_t, std::size_t>>& negatives,
                   const std::vector<AffineLayer>& head, const Matrix& f_ti,
                   const Matrix& q_tt, const Matrix& f_st) {
    CdItmResult res;
    res.d_img = Matrix(f_ti.rows, f_ti.cols);
    res.d_src_txt = Matrix(f_st.rows, f_st.cols);
    res.head_grads = zeros_like(head);
    res.n_pos = positives.size();
    res.n_neg = negatives.size();
    const std::size_t n = positives.size() + negatives.size();
    if (n == 0) return res;
    res.active = true;

    const std::size_t d = f_ti.cols;
    Matrix inputs(n, 2 * d);
    std::size_t r = 0;
    for (auto [i, q] : positives) {
        std::copy(f_ti.row(i), f_ti.row(i) + d, inputs.row(r));
        std::copy(q_tt.row(q), q_tt.row(q) + d, inputs.row(r) + d);
        ++r;
    }
    for (auto [i, j] : negatives) {
        std::copy(f_ti.row(i), f_ti.row(i) + d, inputs.row(r));
        std::copy(f_st.row(j), f_st.row(j) + d, inputs.row(r) + d);
        ++r;
    }

    MlpCache cache;
    Matrix logits = mlp_forward(head, inputs, &cache);  // n x 2: [match, non-match]
    if (logits.cols != 2) throw ShapeError("cd_itm: head must emit 2 logits");

    const double weight = 1.0 / static_cast<double>(n);
    Matrix d_logits(n, 2);
    for (std::size_t row = 0; row < n; ++row) {
        double* l = logits.row(row);
        softmax_temp_in_place(l, 2, 1.0);
        const std::size_t cls = row < positives.size() ? 0 : 1;
        res.value -= weight * std::log(l[cls]);
        d_logits.at(row, 0) = weight * (l[0] - (cls == 0 ? 1.0 : 0.0));
        d_logits.at(row, 1) = weight * (l[1] - (cls == 1 ? 1.0 : 0.0));
    }

    Matrix d_inputs = mlp_backward(head, cache, d_logits, res.head_grads);
    r = 0;
    for (auto [i, q] : positives) {
        (void)q;  // queue side is a constant
        kernels::axpy(1.0, d_inputs.row(r), res.d_img.row(i), d);
        ++r;
    }
    for (auto [i, j] : negatives) {
        kernels::axpy(1.0, d_inputs.row(r), res.d_img.row(i), d);
        kernels::axpy(1.0, d_inputs.row(r) + d, res.d_src_txt.row(j), d);
        ++r;
    }
    return res;
}

LossReport total_loss(const LossParts& parts, const LossConfig& cfg) {
    cfg.validate();
    LossReport rep;
    rep.cd_itc = parts.cd_itc.value_or(0.0);
    rep.cd_itm = parts.cd_itm.value_or(0.0);
    rep.aux = parts.aux;
    rep.positives = parts.positives;
    rep.negatives = parts.negatives;
    rep.skipped_terms = (parts.cd_itc ? 0 : 1) + (parts.cd_itm ? 0 : 1);
    rep.total = cfg.lambda1 * rep.cd_itc + cfg.lambda2 * rep.cd_itm + cfg.lambda3 * rep.aux;
    return rep;
}

}  // namespace gckd
