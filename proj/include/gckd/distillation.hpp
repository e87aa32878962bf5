#pragma once

#include <optional>

#include "gckd/model.hpp"

namespace gckd {

struct TeacherStudentPair {
    ModelParams student;
    ModelParams teacher;
    double momentum = 0.999;
};

// teacher <- momentum * teacher + (1 - momentum) * student, elementwise.
void ema_update(TeacherStudentPair& pair);

// Teacher-generated soft targets over the target queues. A direction is
// absent when its queue was empty (the loss term is skipped that step).
struct PseudoTargets {
    std::optional<Matrix> i2t;  // B x |Q_TT|, rows sum to 1
    std::optional<Matrix> t2i;  // B x |Q_TI|
    double tau = 0.07;
};

PseudoTargets pseudo_targets(const FeatureBatch& teacher_img,
                             const FeatureBatch& teacher_txt, const Matrix& q_tt,
                             const Matrix& q_ti, double tau);

}  // namespace gckd
