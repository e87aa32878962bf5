#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gckd/distillation.hpp"
#include "gckd/rng.hpp"

using namespace gckd;

namespace {

ModelDims tiny_dims() {
    ModelDims d;
    d.d_raw = 6;
    d.embed_dim = 4;
    d.hidden_dim = 8;
    d.gnn_layers = 2;
    d.head_hidden = 4;
    return d;
}

Matrix unit_rows(Rng& rng, std::size_t n, std::size_t d) {
    Matrix m(n, d);
    for (std::size_t i = 0; i < n; ++i) {
        auto v = random_unit_vector(rng, d);
        std::copy(v.begin(), v.end(), m.row(i));
    }
    return m;
}

FeatureBatch teacher_batch(Matrix m, Modality mod) {
    FeatureBatch fb;
    fb.features = std::move(m);
    fb.domain = Domain::Target;
    fb.modality = mod;
    fb.provenance = Provenance::Teacher;
    fb.role = mod == Modality::Image ? FeatureRole::TeacherTargetImage
                                     : FeatureRole::TeacherTargetText;
    return fb;
}

}  // namespace

TEST_CASE("ema closed forms") {
    TeacherStudentPair pair;
    pair.student = init_model(1, tiny_dims());
    pair.teacher = zeros_like(pair.student);
    // plant known values in the first tensor
    pair.teacher.image_encoder.layers[0].w.at(0, 0) = 0.0;
    pair.student.image_encoder.layers[0].w.at(0, 0) = 1.0;

    pair.momentum = 0.999;
    ema_update(pair);
    CHECK(pair.teacher.image_encoder.layers[0].w.at(0, 0) == doctest::Approx(0.001));

    auto teacher_before = pair.teacher;
    pair.momentum = 1.0;
    ema_update(pair);
    CHECK(pair.teacher == teacher_before);

    pair.momentum = 0.0;
    ema_update(pair);
    CHECK(pair.teacher == pair.student);
}

TEST_CASE("ema never mutates the student") {
    TeacherStudentPair pair;
    pair.student = init_model(3, tiny_dims());
    pair.teacher = init_model(4, tiny_dims());
    pair.momentum = 0.9;
    auto student_before = pair.student;
    ema_update(pair);
    CHECK(pair.student == student_before);
}

TEST_CASE("ema closed form over n frozen-student steps") {
    TeacherStudentPair pair;
    pair.student = init_model(5, tiny_dims());
    pair.teacher = init_model(6, tiny_dims());
    pair.momentum = 0.999;
    auto theta0 = pair.teacher;

    int n = 0;
    auto check_closed_form = [&]() {
        const double mn = std::pow(0.999, n);
        std::vector<std::span<const double>> t0, s0, tn;
        visit_tensors(static_cast<const ModelParams&>(theta0),
                      [&](std::span<const double> t) { t0.push_back(t); });
        visit_tensors(static_cast<const ModelParams&>(pair.student),
                      [&](std::span<const double> t) { s0.push_back(t); });
        visit_tensors(static_cast<const ModelParams&>(pair.teacher),
                      [&](std::span<const double> t) { tn.push_back(t); });
        double worst = 0.0;
        for (std::size_t t = 0; t < tn.size(); ++t)
            for (std::size_t i = 0; i < tn[t].size(); ++i) {
                const double expect = mn * t0[t][i] + (1.0 - mn) * s0[t][i];
                worst = std::max(worst, std::abs(tn[t][i] - expect));
            }
        return worst;
    };

    for (; n < 10; ) {
        ema_update(pair);
        ++n;
    }
    CHECK(check_closed_form() <= 1e-12);
}

TEST_CASE("ema rejects structure drift and bad momentum") {
    TeacherStudentPair pair;
    pair.student = init_model(1, tiny_dims());
    ModelDims other = tiny_dims();
    other.embed_dim = 5;
    pair.teacher = init_model(1, other);
    pair.momentum = 0.5;
    CHECK_THROWS_AS(ema_update(pair), StructuralError);

    pair.teacher = pair.student;
    pair.momentum = 1.5;
    CHECK_THROWS_AS(ema_update(pair), ParamError);
}

TEST_CASE("pseudo targets: singleton and identical-queue cases") {
    Rng rng(7);
    auto img = teacher_batch(unit_rows(rng, 3, 4), Modality::Image);
    auto txt = teacher_batch(unit_rows(rng, 3, 4), Modality::Text);

    Matrix q1 = unit_rows(rng, 1, 4);
    auto t1 = pseudo_targets(img, txt, q1, Matrix(0, 0), 0.07);
    REQUIRE(t1.i2t.has_value());
    CHECK_FALSE(t1.t2i.has_value());
    for (std::size_t i = 0; i < 3; ++i) CHECK(t1.i2t->at(i, 0) == 1.0);

    Matrix qsame(4, 4);
    auto row = random_unit_vector(rng, 4);
    for (std::size_t i = 0; i < 4; ++i) std::copy(row.begin(), row.end(), qsame.row(i));
    auto t2 = pseudo_targets(img, txt, qsame, qsame, 0.07);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t q = 0; q < 4; ++q)
            CHECK(t2.i2t->at(i, q) == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("pseudo targets match an extended-precision recomputation") {
    Rng rng(11);
    auto img = teacher_batch(unit_rows(rng, 2, 5), Modality::Image);
    auto txt = teacher_batch(unit_rows(rng, 2, 5), Modality::Text);
    Matrix qtt = unit_rows(rng, 3, 5);
    Matrix qti = unit_rows(rng, 3, 5);
    auto t = pseudo_targets(img, txt, qtt, qti, 0.07);

    auto oracle = [&](const Matrix& feats, const Matrix& queue, std::size_t i,
                      std::size_t q) {
        std::vector<long double> e(queue.rows);
        long double sum = 0.0L;
        for (std::size_t c = 0; c < queue.rows; ++c) {
            long double dot = 0.0L;
            for (std::size_t k = 0; k < queue.cols; ++k)
                dot += static_cast<long double>(feats.at(i, k)) * queue.at(c, k);
            e[c] = expl(dot / 0.07L);
            sum += e[c];
        }
        return static_cast<double>(e[q] / sum);
    };
    for (std::size_t i = 0; i < 2; ++i) {
        double rowsum = 0.0;
        for (std::size_t q = 0; q < 3; ++q) {
            CHECK(t.i2t->at(i, q) ==
                  doctest::Approx(oracle(img.features, qtt, i, q)).epsilon(1e-12));
            CHECK(t.t2i->at(i, q) ==
                  doctest::Approx(oracle(txt.features, qti, i, q)).epsilon(1e-12));
            rowsum += t.i2t->at(i, q);
        }
        CHECK(std::abs(rowsum - 1.0) <= 1e-9);
    }
}

TEST_CASE("pseudo targets are invariant under joint queue/column permutation") {
    Rng rng(13);
    auto img = teacher_batch(unit_rows(rng, 2, 4), Modality::Image);
    auto txt = teacher_batch(unit_rows(rng, 2, 4), Modality::Text);
    Matrix q = unit_rows(rng, 5, 4);
    auto base = pseudo_targets(img, txt, q, Matrix(0, 0), 0.07);

    Matrix rq(5, 4);  // reversed queue
    for (std::size_t i = 0; i < 5; ++i)
        std::copy(q.row(4 - i), q.row(4 - i) + 4, rq.row(i));
    auto perm = pseudo_targets(img, txt, rq, Matrix(0, 0), 0.07);
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t c = 0; c < 5; ++c)
            CHECK(perm.i2t->at(i, c) ==
                  doctest::Approx(base.i2t->at(i, 4 - c)).epsilon(1e-14));
}

TEST_CASE("pseudo targets demand teacher provenance") {
    Rng rng(17);
    auto img = teacher_batch(unit_rows(rng, 2, 4), Modality::Image);
    auto txt = teacher_batch(unit_rows(rng, 2, 4), Modality::Text);
    FeatureBatch student = img;
    student.provenance = Provenance::Student;
    student.role = FeatureRole::TargetImage;
    Matrix q = unit_rows(rng, 2, 4);
    CHECK_THROWS_AS(pseudo_targets(student, txt, q, q, 0.07), UsageError);
    CHECK_THROWS_AS(pseudo_targets(img, txt, q, q, 0.0), ParamError);
}
