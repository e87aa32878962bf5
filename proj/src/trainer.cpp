#include "gckd/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "gckd/kernels.hpp"

namespace gckd {

const char* to_string(AblationMode m) {
    switch (m) {
        case AblationMode::Baseline: return "baseline";
        case AblationMode::Cmkd: return "cmkd";
        case AblationMode::CmkdGmp: return "cmkd_gmp";
    }
    return "?";
}

AblationMode parse_mode(std::string_view s) {
    if (s == "baseline") return AblationMode::Baseline;
    if (s == "cmkd") return AblationMode::Cmkd;
    if (s == "cmkd_gmp") return AblationMode::CmkdGmp;
    throw ConfigError("unknown ablation mode: " + std::string(s));
}

void TrainConfig::validate() const {
    if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (lr <= 0.0) throw ConfigError("train: lr must be positive");
    if (weight_decay < 0.0) throw ConfigError("train: weight_decay must be >= 0");
    if (grad_clip < 0.0) throw ConfigError("train: grad_clip must be >= 0");
    if (ema_momentum < 0.0 || ema_momentum > 1.0)
        throw ConfigError("train: ema_momentum must be in [0, 1]");
    if (knn_k < 1) throw ConfigError("train: knn_k must be >= 1");
    if (memory_capacity < 1) throw ConfigError("train: memory capacity must be >= 1");
    if (dims.embed_dim < 1 || dims.d_raw < 1 || dims.hidden_dim < 1 ||
        dims.gnn_layers < 1 || dims.head_hidden < 1)
        throw ConfigError("train: model dims must be >= 1");
    loss.validate();
}

MemoryBank& TrainState::bank(Domain d, Modality m) {
    const std::size_t idx = (d == Domain::Source ? 0 : 1) + (m == Modality::Text ? 2 : 0);
    return banks[idx];
}
const MemoryBank& TrainState::bank(Domain d, Modality m) const {
    return const_cast<TrainState*>(this)->bank(d, m);
}

TrainState init_train_state(const TrainConfig& cfg) {
    cfg.validate();
    TrainState st{
        TeacherStudentPair{},
        {},
        AdamWState{},
        0,
        Rng(derive_seed(cfg.seed, 90)),
    };
    st.pair.student = init_model(cfg.seed, cfg.dims);
    st.pair.teacher = st.pair.student;
    st.pair.momentum = cfg.ema_momentum;
    st.banks.emplace_back(cfg.memory_capacity, Domain::Source, Modality::Image);
    st.banks.emplace_back(cfg.memory_capacity, Domain::Target, Modality::Image);
    st.banks.emplace_back(cfg.memory_capacity, Domain::Source, Modality::Text);
    st.banks.emplace_back(cfg.memory_capacity, Domain::Target, Modality::Text);
    const std::size_t n = scalar_count(st.pair.student);
    st.opt.m.assign(n, 0.0);
    st.opt.v.assign(n, 0.0);
    return st;
}

UnlabeledBatch unlabeled_batch(const std::vector<Sample>& set,
                               std::span<const std::size_t> idx) {
    if (idx.empty()) throw UsageError("unlabeled_batch: empty index list");
    UnlabeledBatch b;
    b.modality = set[idx[0]].modality;
    b.raw = Matrix(idx.size(), set[idx[0]].raw.size());
    for (std::size_t r = 0; r < idx.size(); ++r) {
        const Sample& s = set[idx[r]];
        if (s.modality != b.modality) throw UsageError("unlabeled_batch: mixed modalities");
        std::copy(s.raw.begin(), s.raw.end(), b.raw.row(r));
    }
    return b;
}

PairedBatch paired_batch(const std::vector<Sample>& images,
                         const std::vector<Sample>& texts,
                         std::span<const std::size_t> idx) {
    if (images.size() != texts.size())
        throw UsageError("paired_batch: image/text lists are not aligned");
    if (idx.empty()) throw UsageError("paired_batch: empty index list");
    PairedBatch b;
    b.image_raw = Matrix(idx.size(), images[idx[0]].raw.size());
    b.text_raw = Matrix(idx.size(), texts[idx[0]].raw.size());
    for (std::size_t r = 0; r < idx.size(); ++r) {
        std::copy(images[idx[r]].raw.begin(), images[idx[r]].raw.end(), b.image_raw.row(r));
        std::copy(texts[idx[r]].raw.begin(), texts[idx[r]].raw.end(), b.text_raw.row(r));
    }
    return b;
}

double cosine_lr(double base, std::size_t step_index, std::size_t total_steps) {
    if (total_steps == 0) return base;
    const double t = static_cast<double>(std::min(step_index, total_steps)) /
                     static_cast<double>(total_steps);
    return base * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

namespace {

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

std::vector<std::span<double>> tensor_views(ModelParams& p) {
    std::vector<std::span<double>> views;
    visit_tensors(p, [&](std::span<double> t) { views.push_back(t); });
    return views;
}

std::vector<std::span<const double>> tensor_views(const ModelParams& p) {
    std::vector<std::span<const double>> views;
    visit_tensors(p, [&](std::span<const double> t) { views.push_back(t); });
    return views;
}

Matrix stack_rows(std::initializer_list<const Matrix*> parts) {
    std::size_t rows = 0, cols = 0;
    for (const Matrix* m : parts) {
        rows += m->rows;
        if (m->rows > 0) cols = m->cols;
    }
    Matrix out(rows, cols);
    std::size_t r = 0;
    for (const Matrix* m : parts)
        for (std::size_t i = 0; i < m->rows; ++i)
            std::copy(m->row(i), m->row(i) + m->cols, out.row(r++));
    return out;
}

}  // namespace

void adamw_step(ModelParams& params, const ModelParams& grads, AdamWState& opt,
                double lr, double weight_decay, double grad_clip) {
    auto pv = tensor_views(params);
    auto gv = tensor_views(grads);
    if (pv.size() != gv.size()) throw StructuralError("adamw: params/grads mismatch");

    double clip_scale = 1.0;
    if (grad_clip > 0.0) {
        double sq = 0.0;
        for (const auto& g : gv) sq += kernels::squared_norm(g.data(), g.size());
        const double norm = std::sqrt(sq);
        if (norm > grad_clip) clip_scale = grad_clip / norm;
    }

    opt.step += 1;
    const double bc1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(opt.step));
    const double bc2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(opt.step));

    std::size_t k = 0;
    for (std::size_t t = 0; t < pv.size(); ++t) {
        std::span<double> p = pv[t];
        std::span<const double> g = gv[t];
        if (p.size() != g.size()) throw StructuralError("adamw: tensor shape mismatch");
        for (std::size_t i = 0; i < p.size(); ++i, ++k) {
            const double gi = g[i] * clip_scale;
            opt.m[k] = kAdamBeta1 * opt.m[k] + (1.0 - kAdamBeta1) * gi;
            opt.v[k] = kAdamBeta2 * opt.v[k] + (1.0 - kAdamBeta2) * gi * gi;
            const double mhat = opt.m[k] / bc1;
            const double vhat = opt.v[k] / bc2;
            p[i] -= lr * (mhat / (std::sqrt(vhat) + kAdamEps) + weight_decay * p[i]);
        }
    }
    if (k != opt.m.size()) throw StructuralError("adamw: moment buffer size mismatch");
}

double warmup_step(TrainState& state, const PairedBatch& batch, const TrainConfig& cfg,
                   double lr_now) {
    ModelParams& student = state.pair.student;
    EncoderCache c_img, c_txt;
    Matrix img = encoder_forward(student.image_encoder, batch.image_raw, &c_img);
    Matrix txt = encoder_forward(student.text_encoder, batch.text_raw, &c_txt);
    const std::size_t b = img.rows;
    const double tau = cfg.loss.tau;

    Matrix logits = matmul_abt(img, txt);
    for (auto& v : logits.data) v /= tau;

    // Row softmax (image -> text) and column softmax (text -> image).
    Matrix p_i2t = logits;
    for (std::size_t i = 0; i < b; ++i) softmax_temp_in_place(p_i2t.row(i), b, 1.0);
    Matrix p_t2i = transpose(logits);
    for (std::size_t j = 0; j < b; ++j) softmax_temp_in_place(p_t2i.row(j), b, 1.0);

    double loss = 0.0;
    for (std::size_t i = 0; i < b; ++i) loss -= std::log(p_i2t.at(i, i));
    for (std::size_t j = 0; j < b; ++j) loss -= std::log(p_t2i.at(j, j));
    loss /= static_cast<double>(2 * b);

    const double w = 1.0 / static_cast<double>(2 * b);
    Matrix d_logits(b, b);
    for (std::size_t i = 0; i < b; ++i)
        for (std::size_t j = 0; j < b; ++j)
            d_logits.at(i, j) = w * ((p_i2t.at(i, j) - (i == j ? 1.0 : 0.0)) +
                                     (p_t2i.at(j, i) - (i == j ? 1.0 : 0.0)));

    Matrix d_img = matmul(d_logits, txt);
    for (auto& v : d_img.data) v /= tau;
    Matrix d_txt = matmul(transpose(d_logits), img);
    for (auto& v : d_txt.data) v /= tau;

    ModelParams grads = zeros_like(student);

    // Pre-train the matching head on the labeled pairs (true positives plus
    // the hardest in-batch negative per image), mirroring the pretrained
    // matching head the adaptation phase starts from.
    if (b > 1 && cfg.loss.lambda2 > 0.0) {
        std::vector<std::pair<std::size_t, std::size_t>> positives, negatives;
        for (std::size_t i = 0; i < b; ++i) {
            positives.emplace_back(i, i);
            std::size_t hard = i == 0 ? 1 : 0;
            for (std::size_t j = 0; j < b; ++j)
                if (j != i && logits.at(i, j) > logits.at(i, hard)) hard = j;
            negatives.emplace_back(i, hard);
        }
        CdItmResult itm = cd_itm(positives, negatives, student.head, img, txt, txt);
        loss += cfg.loss.lambda2 * itm.value;
        const double l2 = cfg.loss.lambda2;
        for (std::size_t i = 0; i < d_img.data.size(); ++i)
            d_img.data[i] += l2 * itm.d_img.data[i];
        for (std::size_t i = 0; i < d_txt.data.size(); ++i)
            d_txt.data[i] += l2 * itm.d_src_txt.data[i];
        for (std::size_t t = 0; t < student.head.size(); ++t) {
            for (std::size_t i = 0; i < itm.head_grads[t].w.data.size(); ++i)
                grads.head[t].w.data[i] += l2 * itm.head_grads[t].w.data[i];
            for (std::size_t i = 0; i < itm.head_grads[t].b.size(); ++i)
                grads.head[t].b[i] += l2 * itm.head_grads[t].b[i];
        }
    }

    encoder_backward(student.image_encoder, c_img, d_img, grads.image_encoder);
    encoder_backward(student.text_encoder, c_txt, d_txt, grads.text_encoder);
    adamw_step(student, grads, state.opt, lr_now, cfg.weight_decay, cfg.grad_clip);
    return loss;
}

void warmup(TrainState& state, const std::vector<Sample>& source_images,
            const std::vector<Sample>& source_texts, const TrainConfig& cfg,
            const MetricsSink& sink) {
    if (source_images.size() != source_texts.size())
        throw UsageError("warmup: source lists must be aligned pairs");
    const std::size_t steps_per_epoch =
        (source_images.size() + cfg.batch_size - 1) / cfg.batch_size;
    const std::size_t total_steps = steps_per_epoch * cfg.warmup_epochs;
    std::uint64_t step = 0;
    for (std::size_t epoch = 0; epoch < cfg.warmup_epochs; ++epoch) {
        const std::uint64_t shuffle_seed = state.rng();
        for (const auto& idx : batch_indices(source_images.size(), cfg.batch_size,
                                             shuffle_seed)) {
            const double lr_now = cosine_lr(cfg.lr, step, total_steps);
            const double loss =
                warmup_step(state, paired_batch(source_images, source_texts, idx), cfg,
                            lr_now);
            if (sink) {
                MetricsRecord rec;
                rec.phase = "warmup";
                rec.iteration = step;
                rec.lr = lr_now;
                rec.report.total = loss;
                sink(rec);
            }
            ++step;
        }
    }
    // Pre-trained initialization for the adaptation phase.
    state.pair.teacher = state.pair.student;
}

StepPlan make_step_plan(const TrainState& state, const PairedBatch& source,
                        const UnlabeledBatch& target_images,
                        const UnlabeledBatch& target_texts, const TrainConfig& cfg,
                        bool use_gmp) {
    if (target_images.modality != Modality::Image ||
        target_texts.modality != Modality::Text)
        throw UsageError("adapt: target batch modality tags are wrong");

    const ModelParams& teacher = state.pair.teacher;
    const ModelParams& student = state.pair.student;
    const std::size_t min_fill = cfg.min_fill();
    auto gated = [&](Domain d, Modality m) {
        const MemoryBank& bank = state.bank(d, m);
        return bank.size() >= min_fill ? bank.snapshot() : Matrix(0, 0);
    };

    StepPlan plan;
    plan.q_si = gated(Domain::Source, Modality::Image);
    plan.q_ti = gated(Domain::Target, Modality::Image);
    plan.q_st = gated(Domain::Source, Modality::Text);
    plan.q_tt = gated(Domain::Target, Modality::Text);

    // (1) teacher forward on the target batches
    plan.teacher_img = encoder_forward(teacher.image_encoder, target_images.raw);
    plan.teacher_txt = encoder_forward(teacher.text_encoder, target_texts.raw);

    // (2) teacher pseudo-similarity targets over the gated queues
    FeatureBatch t_img{plan.teacher_img, Domain::Target, Modality::Image,
                       Provenance::Teacher, FeatureRole::TeacherTargetImage};
    FeatureBatch t_txt{plan.teacher_txt, Domain::Target, Modality::Text,
                       Provenance::Teacher, FeatureRole::TeacherTargetText};
    plan.targets = pseudo_targets(t_img, t_txt, plan.q_tt, plan.q_ti, cfg.loss.tau);

    // (3)(4) student forward and per-modality graph topology
    Matrix u_ti = encoder_forward(student.image_encoder, target_images.raw);
    Matrix u_tt = encoder_forward(student.text_encoder, target_texts.raw);
    Matrix f_ti = u_ti, f_tt = u_tt;
    if (use_gmp) {
        plan.img_gmp = true;
        CrossDomainGraph gi = build_graph(u_ti, plan.q_si, plan.q_ti, cfg.knn_k);
        plan.img_topo = gi.topo;
        f_ti = extract_domain_aware(gnn_forward(gi, student.gnn), u_ti.rows,
                                    Domain::Target, Modality::Image)
                   .features;
        plan.txt_gmp = true;
        CrossDomainGraph gt = build_graph(u_tt, plan.q_st, plan.q_tt, cfg.knn_k);
        plan.txt_topo = gt.topo;
        f_tt = extract_domain_aware(gnn_forward(gt, student.gnn), u_tt.rows,
                                    Domain::Target, Modality::Text)
                   .features;
    }

    // (5) thresholded teacher positives and student hard negatives
    if (plan.q_tt.rows > 0)
        plan.positives = select_positives(plan.teacher_img, plan.q_tt, cfg.loss.delta);
    Matrix f_st = encoder_forward(student.text_encoder, source.text_raw);
    plan.negatives = mine_hard_negatives(f_ti, f_st);
    return plan;
}

StepEval eval_step(const ModelParams& student, const StepPlan& plan,
                   const PairedBatch& source, const UnlabeledBatch& target_images,
                   const UnlabeledBatch& target_texts, const TrainConfig& cfg,
                   bool want_grads) {
    StepEval ev;
    EncoderCache c_si, c_st, c_ti, c_tt;
    ev.f_si = encoder_forward(student.image_encoder, source.image_raw, &c_si);
    ev.f_st = encoder_forward(student.text_encoder, source.text_raw, &c_st);
    Matrix u_ti = encoder_forward(student.image_encoder, target_images.raw, &c_ti);
    Matrix u_tt = encoder_forward(student.text_encoder, target_texts.raw, &c_tt);

    GnnCache gc_img, gc_txt;
    Matrix f_ti, f_tt;
    if (plan.img_gmp) {
        CrossDomainGraph g{stack_rows({&u_ti, &plan.q_si, &plan.q_ti}), plan.img_topo};
        Matrix out = gnn_forward(g, student.gnn, &gc_img);
        f_ti = extract_domain_aware(out, u_ti.rows, Domain::Target, Modality::Image)
                   .features;
    } else {
        f_ti = u_ti;
    }
    if (plan.txt_gmp) {
        CrossDomainGraph g{stack_rows({&u_tt, &plan.q_st, &plan.q_tt}), plan.txt_topo};
        Matrix out = gnn_forward(g, student.gnn, &gc_txt);
        f_tt = extract_domain_aware(out, u_tt.rows, Domain::Target, Modality::Text)
                   .features;
    } else {
        f_tt = u_tt;
    }

    CdItcResult itc = cd_itc(f_ti, f_tt, plan.targets, plan.q_tt, plan.q_ti, cfg.loss);
    CdItmResult itm = cd_itm(plan.positives, plan.negatives, student.head, f_ti,
                             plan.q_tt, ev.f_st);

    LossParts parts;
    if (itc.i2t_active || itc.t2i_active) parts.cd_itc = itc.value;
    if (itm.active) parts.cd_itm = itm.value;
    parts.positives = itm.n_pos;
    parts.negatives = itm.n_neg;
    ev.report = total_loss(parts, cfg.loss);

    if (!want_grads) return ev;

    ev.grads = zeros_like(student);
    const double l1 = cfg.loss.lambda1, l2 = cfg.loss.lambda2;

    Matrix d_f_ti(f_ti.rows, f_ti.cols);
    Matrix d_f_tt(f_tt.rows, f_tt.cols);
    for (std::size_t i = 0; i < d_f_ti.data.size(); ++i)
        d_f_ti.data[i] = l1 * itc.d_img.data[i] + l2 * itm.d_img.data[i];
    for (std::size_t i = 0; i < d_f_tt.data.size(); ++i)
        d_f_tt.data[i] = l1 * itc.d_txt.data[i];

    for (std::size_t t = 0; t < student.head.size(); ++t) {
        for (std::size_t i = 0; i < itm.head_grads[t].w.data.size(); ++i)
            ev.grads.head[t].w.data[i] += l2 * itm.head_grads[t].w.data[i];
        for (std::size_t i = 0; i < itm.head_grads[t].b.size(); ++i)
            ev.grads.head[t].b[i] += l2 * itm.head_grads[t].b[i];
    }

    Matrix d_u_ti, d_u_tt;
    if (plan.img_gmp) {
        Matrix d_full(plan.img_topo.vertex_count(), f_ti.cols);
        for (std::size_t i = 0; i < u_ti.rows; ++i)
            std::copy(d_f_ti.row(i), d_f_ti.row(i) + f_ti.cols, d_full.row(i));
        Matrix d_x = gnn_backward(plan.img_topo, student.gnn, gc_img, d_full,
                                  ev.grads.gnn);
        d_u_ti = Matrix(u_ti.rows, u_ti.cols);
        for (std::size_t i = 0; i < u_ti.rows; ++i)
            std::copy(d_x.row(i), d_x.row(i) + u_ti.cols, d_u_ti.row(i));
    } else {
        d_u_ti = d_f_ti;
    }
    if (plan.txt_gmp) {
        Matrix d_full(plan.txt_topo.vertex_count(), f_tt.cols);
        for (std::size_t i = 0; i < u_tt.rows; ++i)
            std::copy(d_f_tt.row(i), d_f_tt.row(i) + f_tt.cols, d_full.row(i));
        Matrix d_x = gnn_backward(plan.txt_topo, student.gnn, gc_txt, d_full,
                                  ev.grads.gnn);
        d_u_tt = Matrix(u_tt.rows, u_tt.cols);
        for (std::size_t i = 0; i < u_tt.rows; ++i)
            std::copy(d_x.row(i), d_x.row(i) + u_tt.cols, d_u_tt.row(i));
    } else {
        d_u_tt = d_f_tt;
    }

    encoder_backward(student.image_encoder, c_ti, d_u_ti, ev.grads.image_encoder);
    encoder_backward(student.text_encoder, c_tt, d_u_tt, ev.grads.text_encoder);

    // Hard-negative text side: gradients also reach the source-text features.
    Matrix d_f_st(ev.f_st.rows, ev.f_st.cols);
    for (std::size_t i = 0; i < d_f_st.data.size(); ++i)
        d_f_st.data[i] = l2 * itm.d_src_txt.data[i];
    encoder_backward(student.text_encoder, c_st, d_f_st, ev.grads.text_encoder);

    return ev;
}

LossReport adapt_step(TrainState& state, const PairedBatch& source,
                      const UnlabeledBatch& target_images,
                      const UnlabeledBatch& target_texts, const TrainConfig& cfg,
                      bool use_gmp, double lr_now) {
    StepPlan plan = make_step_plan(state, source, target_images, target_texts, cfg,
                                   use_gmp);
    StepEval ev = eval_step(state.pair.student, plan, source, target_images,
                            target_texts, cfg, true);

    if (!cfg.graph_dump_dir.empty() && use_gmp) {
        const std::filesystem::path dir(cfg.graph_dump_dir);
        std::filesystem::create_directories(dir);
        const std::string tag = std::to_string(state.iteration);
        dump_edges(plan.img_topo, dir / ("iter_" + tag + "_image.edges"));
        dump_edges(plan.txt_topo, dir / ("iter_" + tag + "_text.edges"));
    }

    // (7) gradient step on the student, (8) EMA, (9) memory pushes
    adamw_step(state.pair.student, ev.grads, state.opt, lr_now, cfg.weight_decay,
               cfg.grad_clip);
    ema_update(state.pair);

    state.bank(Domain::Target, Modality::Image).push_rows(plan.teacher_img, state.iteration);
    state.bank(Domain::Target, Modality::Text).push_rows(plan.teacher_txt, state.iteration);
    state.bank(Domain::Source, Modality::Image).push_rows(ev.f_si, state.iteration);
    state.bank(Domain::Source, Modality::Text).push_rows(ev.f_st, state.iteration);
    state.iteration += 1;
    return ev.report;
}

void adapt(TrainState& state, const std::vector<Sample>& target_images,
           const std::vector<Sample>& target_texts,
           const std::vector<Sample>& source_images,
           const std::vector<Sample>& source_texts, const TrainConfig& cfg,
           AblationMode mode, const MetricsSink& sink) {
    if (mode == AblationMode::Baseline) return;  // warm-up only
    const bool use_gmp = mode == AblationMode::CmkdGmp;

    const std::size_t steps_per_epoch =
        std::min((target_images.size() + cfg.batch_size - 1) / cfg.batch_size,
                 (target_texts.size() + cfg.batch_size - 1) / cfg.batch_size);
    const std::size_t total_steps = steps_per_epoch * cfg.epochs;

    std::vector<std::vector<std::size_t>> src_batches;
    std::size_t src_pos = 0;

    std::uint64_t step = 0;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const std::uint64_t img_seed = state.rng();
        const std::uint64_t txt_seed = state.rng();
        auto img_batches = batch_indices(target_images.size(), cfg.batch_size, img_seed);
        auto txt_batches = batch_indices(target_texts.size(), cfg.batch_size, txt_seed);
        const std::size_t steps = std::min(img_batches.size(), txt_batches.size());
        for (std::size_t s = 0; s < steps; ++s) {
            if (src_pos >= src_batches.size()) {
                src_batches = batch_indices(source_images.size(), cfg.batch_size,
                                            state.rng());
                src_pos = 0;
            }
            const double lr_now = cosine_lr(cfg.lr, step, total_steps);
            LossReport rep = adapt_step(
                state, paired_batch(source_images, source_texts, src_batches[src_pos]),
                unlabeled_batch(target_images, img_batches[s]),
                unlabeled_batch(target_texts, txt_batches[s]), cfg, use_gmp, lr_now);
            ++src_pos;
            if (sink) {
                MetricsRecord rec;
                rec.phase = "adapt";
                rec.iteration = step;
                rec.lr = lr_now;
                rec.report = rep;
                sink(rec);
            }
            ++step;
        }
    }
}

GradCheckReport grad_check(const TrainState& state, const PairedBatch& source,
                           const UnlabeledBatch& target_images,
                           const UnlabeledBatch& target_texts, const TrainConfig& cfg,
                           bool use_gmp, const GradCheckOptions& opts) {
    StepPlan plan = make_step_plan(state, source, target_images, target_texts, cfg,
                                   use_gmp);
    StepEval ev = eval_step(state.pair.student, plan, source, target_images,
                            target_texts, cfg, true);

    ModelParams probe = state.pair.student;
    auto views = tensor_views(probe);
    std::vector<std::span<const double>> grad_views = tensor_views(
        static_cast<const ModelParams&>(ev.grads));
    std::size_t total = 0;
    for (const auto& v : views) total += v.size();

    Rng rng(derive_seed(opts.seed, 777));
    std::uniform_int_distribution<std::size_t> pick(0, total - 1);

    auto locate = [&](std::size_t flat) {
        std::size_t t = 0;
        while (flat >= views[t].size()) {
            flat -= views[t].size();
            ++t;
        }
        return std::pair<std::size_t, std::size_t>(t, flat);
    };

    auto loss_at = [&]() {
        return eval_step(probe, plan, source, target_images, target_texts, cfg, false)
            .report.total;
    };

    GradCheckReport rep;
    // samples >= total means an exhaustive sweep over every parameter.
    const bool exhaustive = opts.samples >= total;
    const std::size_t n_samples = exhaustive ? total : opts.samples;
    for (std::size_t s = 0; s < n_samples; ++s) {
        const std::size_t flat = exhaustive ? s : pick(rng);
        auto [t, o] = locate(flat);
        const double theta = views[t][o];
        views[t][o] = theta + opts.step;
        const double up = loss_at();
        views[t][o] = theta - opts.step;
        const double down = loss_at();
        views[t][o] = theta;

        const double fd = (up - down) / (2.0 * opts.step);
        double analytic = grad_views[t][o];
        if (opts.corruption != 0.0 && s == 0) analytic *= 1.0 + opts.corruption;
        const double rel = std::abs(analytic - fd) /
                           std::max({std::abs(analytic), std::abs(fd), 1e-6});
        if (rel > rep.max_rel_error) {
            rep.max_rel_error = rel;
            rep.worst_flat_index = flat;
        }
        ++rep.checked;
    }
    rep.passed = rep.max_rel_error < opts.tolerance;
    return rep;
}

}  // namespace gckd
