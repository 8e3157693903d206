#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "mpsfin/errors.hpp"
#include "mpsfin/io.hpp"
#include "mpsfin/pipeline.hpp"

namespace {

namespace fs = std::filesystem;
using mpsfin::ExperimentConfig;

struct CommonArgs {
    std::string config_file;
    std::optional<std::uint64_t> seed;
    std::string out_dir = "out";
    std::optional<std::size_t> threads;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_file, "JSON experiment config; flags override its values");
    cmd->add_option("--seed", args.seed, "master 64-bit seed");
    cmd->add_option("--out", args.out_dir, "output directory")->capture_default_str();
    cmd->add_option("--threads", args.threads, "worker threads for path-level parallelism");
}

ExperimentConfig resolve_config(const CommonArgs& args) {
    ExperimentConfig config;
    if (!args.config_file.empty())
        config = ExperimentConfig::from_json(mpsfin::read_json(args.config_file));
    if (args.seed) {
        config.seed = *args.seed;
        config.train.seed = *args.seed;
    }
    if (args.threads) config.n_threads = *args.threads;
    return config;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Matrix-product-state generative model for asset-price paths: "
                 "simulate, train, sample, and price path-dependent options"};
    app.require_subcommand(1);

    CommonArgs gen_args;
    auto* gen = app.add_subcommand("generate", "simulate Heston paths and write them as CSV");
    add_common(gen, gen_args);

    CommonArgs train_args;
    std::string train_data;
    std::optional<unsigned> train_m;
    std::optional<std::size_t> train_dmax, train_epochs;
    std::optional<double> train_lr;
    auto* tr = app.add_subcommand("train", "fit an MPS model to a paths CSV");
    add_common(tr, train_args);
    tr->add_option("--data", train_data, "training paths CSV")->required();
    tr->add_option("--m", train_m, "bits per symbol");
    tr->add_option("--d-max", train_dmax, "bond dimension cap");
    tr->add_option("--epochs", train_epochs, "sweep epochs");
    tr->add_option("--learning-rate", train_lr, "gradient step size");

    CommonArgs sample_args;
    std::string sample_model;
    std::size_t sample_n = 10000;
    auto* sa = app.add_subcommand("sample", "draw paths from a trained model");
    add_common(sa, sample_args);
    sa->add_option("--model", sample_model, "model file (MPS1 format)")->required();
    sa->add_option("--n", sample_n, "number of paths")->capture_default_str();

    CommonArgs price_args;
    std::string price_paths;
    std::optional<std::size_t> price_runs;
    auto* pr = app.add_subcommand("price", "Monte Carlo option prices from a paths CSV");
    add_common(pr, price_args);
    pr->add_option("--paths", price_paths, "paths CSV")->required();
    pr->add_option("--runs", price_runs, "bootstrap pricing runs");

    CommonArgs hist_args;
    std::string hist_paths;
    int hist_t = 5;
    std::size_t hist_bins = 50;
    auto* hi = app.add_subcommand("hist", "normalized histogram of one price column");
    add_common(hi, hist_args);
    hi->add_option("--paths", hist_paths, "paths CSV")->required();
    hi->add_option("--t", hist_t, "time index of the column")->capture_default_str();
    hi->add_option("--bins", hist_bins, "bin count")->capture_default_str();

    CommonArgs rep_args;
    std::vector<unsigned> rep_grid_m;
    std::vector<std::size_t> rep_grid_d;
    auto* re = app.add_subcommand("reproduce",
                                  "full experiment: benchmark row plus one trained model per "
                                  "(m, D_max) grid cell, with a combined table");
    add_common(re, rep_args);
    re->add_option("--grid-m", rep_grid_m, "bits-per-symbol grid");
    re->add_option("--grid-d-max", rep_grid_d, "bond-cap grid");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (gen->parsed()) {
            const fs::path csv = mpsfin::cmd_generate(resolve_config(gen_args), gen_args.out_dir);
            std::cout << "wrote " << csv.string() << "\n";
        } else if (tr->parsed()) {
            ExperimentConfig config = resolve_config(train_args);
            if (train_m) config.m_bits = *train_m;
            if (train_dmax) config.train.d_max = *train_dmax;
            if (train_epochs) config.train.epochs = *train_epochs;
            if (train_lr) config.train.learning_rate = *train_lr;
            const fs::path model = mpsfin::cmd_train(config, train_data, train_args.out_dir);
            std::cout << "wrote " << model.string() << "\n";
        } else if (sa->parsed()) {
            const ExperimentConfig config = resolve_config(sample_args);
            const fs::path csv =
                mpsfin::cmd_sample(sample_model, sample_n, config.seed, config, sample_args.out_dir);
            std::cout << "wrote " << csv.string() << "\n";
        } else if (pr->parsed()) {
            ExperimentConfig config = resolve_config(price_args);
            if (price_runs) config.n_price_runs = *price_runs;
            mpsfin::cmd_price(price_paths, config, price_args.out_dir);
            std::cout << "wrote " << (fs::path(price_args.out_dir) / "prices.json").string() << "\n";
        } else if (hi->parsed()) {
            const fs::path out = mpsfin::cmd_hist(hist_paths, hist_t, hist_bins, hist_args.out_dir);
            std::cout << "wrote " << out.string() << "\n";
        } else if (re->parsed()) {
            ExperimentConfig config = resolve_config(rep_args);
            if (!rep_grid_m.empty()) config.grid_m = rep_grid_m;
            if (!rep_grid_d.empty()) config.grid_d_max = rep_grid_d;
            mpsfin::cmd_reproduce(config, rep_args.out_dir);
            std::cout << "wrote " << (fs::path(rep_args.out_dir) / "table.md").string() << "\n";
        }
    } catch (const mpsfin::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const mpsfin::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
