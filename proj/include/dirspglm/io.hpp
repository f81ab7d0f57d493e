#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dirspglm/glm.hpp"
#include "dirspglm/inference.hpp"
#include "dirspglm/mcmc.hpp"
#include "dirspglm/ml_fit.hpp"

namespace dirspglm::io {

/// Writes `content` to a sibling temp file, then renames it over `path`.
void write_atomic(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);

/// Formats with 6 significant digits (NaN prints as "NA").
std::string fmt6(double v);
/// Shortest text that round-trips the double.
std::string fmt_full(double v);

/// Comma-separated numbers; throws invalid_input naming `what` on garbage.
std::vector<double> parse_number_list(const std::string& text, const std::string& what);

struct CsvSpec {
  std::string response = "y";
  std::vector<std::string> covariates;  // empty: every column except the response
  bool add_intercept = true;
};

/// Reads a header + rows CSV into a Dataset. Row numbers in errors are
/// 1-based data rows (the header is row 0).
Dataset load_csv(const std::filesystem::path& path, const CsvSpec& spec, SupportPtr support);
/// Column names of the design matrix after `load_csv` (intercept first).
std::vector<std::string> design_names(const std::filesystem::path& path, const CsvSpec& spec);

/// `y,x1,...` with the intercept column (if all ones in column 0) dropped.
std::string dataset_csv(const Dataset& data);

/// Chain CSV: two rows per stored iteration, block "beta" then block "f0".
std::string chain_csv(const PosteriorChain& chain);
/// Summary sidecar for a chain; `timestamp` may be empty.
nlohmann::json chain_summary(const PosteriorChain& chain, const std::string& timestamp);
/// Path of the sidecar next to a chain CSV.
std::filesystem::path sidecar_path(const std::filesystem::path& chain_path);
/// Rebuilds the stored draws from a chain CSV and its sidecar.
PosteriorChain read_chain(const std::filesystem::path& chain_path);

nlohmann::json ml_fit_json(const MlFit& fit, double mu0);

/// `row_id,y0,point,lower,upper` rows.
std::string prediction_csv(const std::vector<double>& y0s,
                           const std::vector<FunctionalPosterior>& results);
/// `draw,value` rows.
std::string samples_csv(const std::vector<double>& samples);

/// Flat `key = value` file; `#` starts a comment. Keys are returned without
/// leading dashes.
std::map<std::string, std::string> parse_config(const std::string& text);

}  // namespace dirspglm::io
