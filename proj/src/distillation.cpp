#include "gckd/distillation.hpp"

#include "gckd/kernels.hpp"

namespace gckd {

namespace {

void ema_span(std::span<double> teacher, std::span<const double> student, double m) {
    for (std::size_t i = 0; i < teacher.size(); ++i)
        teacher[i] = m * teacher[i] + (1.0 - m) * student[i];
}

}  // namespace

void ema_update(TeacherStudentPair& pair) {
    if (pair.momentum < 0.0 || pair.momentum > 1.0)
        throw ParamError("ema_update: momentum must be in [0, 1]");
    if (!same_structure(pair.student, pair.teacher))
        throw StructuralError("ema_update: student/teacher structure drift");

    // Walk both models in the shared traversal order.
    std::vector<std::span<const double>> student_tensors;
    visit_tensors(static_cast<const ModelParams&>(pair.student),
                  [&](std::span<const double> t) { student_tensors.push_back(t); });
    std::size_t idx = 0;
    visit_tensors(pair.teacher, [&](std::span<double> t) {
        ema_span(t, student_tensors[idx++], pair.momentum);
    });
}

PseudoTargets pseudo_targets(const FeatureBatch& teacher_img,
                             const FeatureBatch& teacher_txt, const Matrix& q_tt,
                             const Matrix& q_ti, double tau) {
    if (teacher_img.provenance != Provenance::Teacher ||
        teacher_txt.provenance != Provenance::Teacher)
        throw UsageError("pseudo_targets: inputs must be teacher features");
    if (tau <= 0.0) throw ParamError("pseudo_targets: tau must be positive");

    PseudoTargets out;
    out.tau = tau;
    if (q_tt.rows > 0) {
        Matrix sims = matmul_abt(teacher_img.features, q_tt);
        for (std::size_t i = 0; i < sims.rows; ++i)
            softmax_temp_in_place(sims.row(i), sims.cols, tau);
        out.i2t = std::move(sims);
    }
    if (q_ti.rows > 0) {
        Matrix sims = matmul_abt(teacher_txt.features, q_ti);
        for (std::size_t i = 0; i < sims.rows; ++i)
            softmax_temp_in_place(sims.row(i), sims.cols, tau);
        out.t2i = std::move(sims);
    }
    return out;
}

}  // namespace gckd
