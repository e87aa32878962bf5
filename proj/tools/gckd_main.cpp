// Experiment driver: data generation, warm-up + adaptation training,
// retrieval evaluation, ablation sweeps and gradient checking.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "gckd/commands.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::optional<std::string> out;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> mode;
};

void add_common(CLI::App* sub, CommonArgs& args) {
    sub->add_option("--config", args.config_path, "experiment config file")
        ->required();
    sub->add_option("--out", args.out, "output directory (overrides run.output_dir)");
    sub->add_option("--seed", args.seed, "run seed override");
    sub->add_option("--mode", args.mode, "ablation mode override")
        ->check(CLI::IsMember({"baseline", "cmkd", "cmkd_gmp"}));
}

gckd::ExperimentConfig resolve(const CommonArgs& args) {
    auto cfg = gckd::ExperimentConfig::load(args.config_path);
    if (args.out) cfg.output_dir = *args.out;
    if (args.seed) cfg.seed = *args.seed;
    if (args.mode) cfg.mode = gckd::parse_mode(*args.mode);
    cfg.finalize();
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"gckd: cross-domain retrieval adaptation engine"};
    app.require_subcommand(1);

    CommonArgs gen_args, train_args, eval_args, ablate_args, gradcheck_args;
    auto* gen = app.add_subcommand("gen", "generate the synthetic dataset files");
    add_common(gen, gen_args);
    auto* train = app.add_subcommand("train", "run warm-up and adaptation");
    add_common(train, train_args);
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on the target set");
    add_common(eval, eval_args);
    auto* ablate = app.add_subcommand("ablate", "run the three-mode ablation sweep");
    add_common(ablate, ablate_args);
    auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient check");
    add_common(gradcheck, gradcheck_args);

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            auto cfg = resolve(gen_args);
            gckd::run_gen(cfg, cfg.output_dir);
        } else if (train->parsed()) {
            auto cfg = resolve(train_args);
            gckd::run_train(cfg, cfg.output_dir, cfg.output_dir);
        } else if (eval->parsed()) {
            auto cfg = resolve(eval_args);
            auto rep = gckd::run_eval(cfg, cfg.output_dir, cfg.output_dir);
            std::cout << "rank1=" << rep.rank1 << " rank5=" << rep.rank5
                      << " rank10=" << rep.rank10 << " map=" << rep.map << "\n";
        } else if (ablate->parsed()) {
            auto cfg = resolve(ablate_args);
            gckd::run_ablate(cfg, cfg.output_dir);
        } else if (gradcheck->parsed()) {
            auto cfg = resolve(gradcheck_args);
            if (!gckd::run_gradcheck(cfg)) {
                nlohmann::json err;
                err["error"] = {{"category", "verification"},
                                {"message", "gradient check failed"}};
                std::cerr << err.dump() << "\n";
                return 2;
            }
        }
    } catch (const gckd::Error& e) {
        nlohmann::json err;
        err["error"] = {{"category", e.category()}, {"message", e.what()}};
        std::cerr << err.dump() << "\n";
        return 1;
    } catch (const std::exception& e) {
        nlohmann::json err;
        err["error"] = {{"category", "internal"}, {"message", e.what()}};
        std::cerr << err.dump() << "\n";
        return 1;
    }
    return 0;
}
