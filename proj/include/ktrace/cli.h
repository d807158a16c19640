#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "ktrace/features.h"
#include "ktrace/prep.h"

namespace ktrace {

inline constexpr const char* kVersion = "0.1.0";

// Runs one subcommand; `args` excludes the program name. Returns the exit
// status: 0 success, 2 usage error, 3 data error, 4 numeric failure.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

// Dataset directories hold interactions.csv in the labeled store format.
Dataset load_dataset_dir(const std::filesystem::path& dir);
// Writes interactions.csv, stats.json, stats.tsv and powerlaw.tsv.
void save_dataset_dir(const std::filesystem::path& dir, const Dataset& dataset);

// Feature rows plus their <rows>.layout.json and <rows>.index.tsv sidecars.
void save_rows(const std::filesystem::path& path, std::span<const SparseFeatureRow> rows,
               const FeatureLayout& layout);
std::pair<std::vector<SparseFeatureRow>, FeatureLayout> load_rows(
    const std::filesystem::path& path);

}  // namespace ktrace
