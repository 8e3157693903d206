#pragma once

#include <filesystem>
#include <vector>

#include "mpsfin/heston.hpp"
#include "mpsfin/pricing.hpp"
#include "mpsfin/train.hpp"

#include "json.hpp"

namespace mpsfin {

// Everything one experiment needs, mirrored one-to-one by the JSON config
// file. CLI flags override file values; each command writes the resolved
// result next to its outputs.
struct ExperimentConfig {
    HestonParams heston;
    std::size_t n_paths = 10000;
    unsigned m_bits = 6;
    TrainConfig train;
    std::vector<OptionSpec> options = default_options();
    std::size_t n_price_runs = 10;
    std::uint64_t seed = 12345;
    std::size_t n_threads = 1;
    // reproduce grid: the cell set is grid_m x grid_d_max
    std::vector<unsigned> grid_m = {4, 5, 6};
    std::vector<std::size_t> grid_d_max = {150};

    static std::vector<OptionSpec> default_options();
    void validate() const;

    static ExperimentConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

// The CLI subcommands as library functions; each writes its artifacts under
// `out_dir` plus a resolved-config echo, and throws on failure (the CLI maps
// exception types to exit codes).

// heston_paths.csv + heston_params.json
std::filesystem::path cmd_generate(const ExperimentConfig& config,
                                   const std::filesystem::path& out_dir);

// model.mps + train_report.json; returns the model path. The dataset's
// deterministic t_0 column, when present, is included in the discretization
// bounds but excluded from the trained chain.
std::filesystem::path cmd_train(const ExperimentConfig& config,
                                const std::filesystem::path& dataset_csv,
                                const std::filesystem::path& out_dir);

// samples.csv with header t1..tM; n = 0 writes the header only.
std::filesystem::path cmd_sample(const std::filesystem::path& model_file, std::size_t n,
                                 std::uint64_t seed, const ExperimentConfig& config,
                                 const std::filesystem::path& out_dir);

// prices.json: per option, n_price_runs bootstrap resamples of the input
// paths (fresh stream per run), their across-run mean and standard error,
// and the implied volatility of European entries. A failed IV is recorded on
// its row without aborting the others.
nlohmann::json cmd_price(const std::filesystem::path& paths_csv, const ExperimentConfig& config,
                         const std::filesystem::path& out_dir);

// hist_t<k>.csv: normalized density histogram of price column t_k with
// explicit bin edges.
std::filesystem::path cmd_hist(const std::filesystem::path& paths_csv, int t_index,
                               std::size_t bins, const std::filesystem::path& out_dir);

// The full experiment: one shared Heston dataset, one trained model per
// (m, d_max) grid cell, n_price_runs fresh sample batches per row, and a
// combined table.json / table.md. Cell failures are recorded in the table
// and do not abort the run.
nlohmann::json cmd_reproduce(const ExperimentConfig& config, const std::filesystem::path& out_dir);

} // namespace mpsfin
