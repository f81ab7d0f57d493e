#include "dirspglm/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "dirspglm/error.hpp"

namespace dirspglm::io {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kOrigin = "cli";

[[noreturn]] void fail(ErrorKind kind, const std::string& msg) { throw Error(kind, kOrigin, msg); }

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, sep)) out.push_back(trim(cell));
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

std::optional<double> to_double(const std::string& s) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || s.empty()) return std::nullopt;
  return v;
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

Table read_table(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::invalid_input, "cannot open " + path.string());
  Table t;
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::invalid_input, path.string() + " has no header");
  t.header = split(trim(line), ',');
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    auto cells = split(trim(line), ',');
    if (cells.size() != t.header.size()) {
      std::ostringstream os;
      os << path.string() << " row " << t.rows.size() + 1 << " has " << cells.size() << " fields, expected "
         << t.header.size();
      fail(ErrorKind::invalid_input, os.str());
    }
    t.rows.push_back(std::move(cells));
  }
  return t;
}

std::size_t column_index(const Table& t, const std::string& name, const fs::path& path) {
  auto it = std::find(t.header.begin(), t.header.end(), name);
  if (it == t.header.end()) fail(ErrorKind::invalid_input, "unknown column '" + name + "' in " + path.string());
  return static_cast<std::size_t>(it - t.header.begin());
}

std::vector<std::string> resolve_covariates(const Table& t, const CsvSpec& spec) {
  if (!spec.covariates.empty()) return spec.covariates;
  std::vector<std::string> out;
  for (const auto& h : t.header)
    if (h != spec.response) out.push_back(h);
  return out;
}

const char* name_of(BetaUpdate v) { return v == BetaUpdate::joint ? "joint" : "one_at_a_time"; }
const char* name_of(FisherMode v) { return v == FisherMode::frozen_at_init ? "frozen_at_init" : "recomputed"; }
const char* name_of(WeightScale v) { return v == WeightScale::sum_to_one ? "sum_to_one" : "sum_to_n"; }
const char* name_of(F0Move v) { return v == F0Move::componentwise ? "componentwise" : "whole_vector"; }
const char* name_of(BetaTruncation v) { return v == BetaTruncation::reject ? "reject" : "redraw"; }

}  // namespace

void write_atomic(const fs::path& path, const std::string& content) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::invalid_input, "cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) fail(ErrorKind::invalid_input, "write to " + tmp.string() + " failed");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    fail(ErrorKind::invalid_input, "cannot rename onto " + path.string());
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::invalid_input, "cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::string fmt6(double v) {
  if (std::isnan(v)) return "NA";
  std::ostringstream os;
  os << std::setprecision(6) << v;
  return os.str();
}

std::string fmt_full(double v) {
  if (std::isnan(v)) return "NA";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::vector<double> parse_number_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  for (const auto& cell : split(text, ',')) {
    auto v = to_double(cell);
    if (!v || !std::isfinite(*v)) fail(ErrorKind::invalid_input, what + ": '" + cell + "' is not a number");
    out.push_back(*v);
  }
  if (out.empty()) fail(ErrorKind::invalid_input, what + " is empty");
  return out;
}

Dataset load_csv(const fs::path& path, const CsvSpec& spec, SupportPtr support) {
  const Table t = read_table(path);
  const std::size_t yc = column_index(t, spec.response, path);
  std::vector<std::size_t> xc;
  for (const auto& name : resolve_covariates(t, spec)) xc.push_back(column_index(t, name, path));

  const auto n = static_cast<Eigen::Index>(t.rows.size());
  const Eigen::Index off = spec.add_intercept ? 1 : 0;
  Eigen::MatrixXd X(n, static_cast<Eigen::Index>(xc.size()) + off);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = t.rows[static_cast<std::size_t>(i)];
    auto yv = to_double(row[yc]);
    if (!yv || !support->index_of(*yv)) {
      std::ostringstream os;
      os << "row " << i + 1 << ": response '" << row[yc] << "' is not a support score";
      fail(ErrorKind::invalid_input, os.str());
    }
    y[i] = *yv;
    if (off) X(i, 0) = 1.0;
    for (std::size_t j = 0; j < xc.size(); ++j) {
      auto v = to_double(row[xc[j]]);
      if (!v || !std::isfinite(*v)) {
        std::ostringstream os;
        os << "row " << i + 1 << ": covariate '" << t.header[xc[j]] << "' value '" << row[xc[j]]
           << "' is not numeric";
        fail(ErrorKind::invalid_input, os.str());
      }
      X(i, static_cast<Eigen::Index>(j) + off) = *v;
    }
  }
  return make_dataset(std::move(X), std::move(y), std::move(support));
}

std::vector<std::string> design_names(const fs::path& path, const CsvSpec& spec) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::invalid_input, "cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  Table t;
  t.header = split(trim(line), ',');
  std::vector<std::string> out;
  if (spec.add_intercept) out.emplace_back("(intercept)");
  for (const auto& c : resolve_covariates(t, spec)) out.push_back(c);
  return out;
}

std::string dataset_csv(const Dataset& data) {
  const bool intercept = data.p() > 0 && (data.X.col(0).array() == 1.0).all();
  const Eigen::Index first = intercept ? 1 : 0;
  std::ostringstream os;
  os << "y";
  for (Eigen::Index j = first; j < data.p(); ++j) os << ",x" << j;
  os << '\n';
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    os << fmt_full(data.y[i]);
    for (Eigen::Index j = first; j < data.p(); ++j) os << ',' << fmt_full(data.X(i, j));
    os << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Chains

std::string chain_csv(const PosteriorChain& chain) {
  const Eigen::Index p = chain.beta.cols();
  const Eigen::Index k = chain.f0.cols();
  std::ostringstream os;
  os << "iter";
  for (Eigen::Index j = 0; j < p; ++j) os << ",beta_" << j;
  for (Eigen::Index l = 0; l < k; ++l) os << ",f0_" << l;
  os << ",block,accepted\n";
  auto row = [&](long iter, const Eigen::RowVectorXd& beta, const Eigen::RowVectorXd& f0,
                 const char* block, int accepted) {
    os << iter;
    for (Eigen::Index j = 0; j < p; ++j) os << ',' << fmt_full(beta[j]);
    for (Eigen::Index l = 0; l < k; ++l) os << ',' << fmt_full(f0[l]);
    os << ',' << block << ',' << accepted << '\n';
  };
  for (Eigen::Index b = 0; b < chain.size(); ++b) {
    const long iter = chain.config.burn_in + static_cast<long>(b);
    const Eigen::RowVectorXd f0_prev = b == 0 ? chain.f0_before_first : Eigen::RowVectorXd(chain.f0.row(b - 1));
    row(iter, chain.beta.row(b), f0_prev, "beta", chain.beta_accepted[static_cast<std::size_t>(b)]);
    row(iter, chain.beta.row(b), chain.f0.row(b), "f0", chain.f0_accepted[static_cast<std::size_t>(b)]);
  }
  return os.str();
}

json chain_summary(const PosteriorChain& chain, const std::string& timestamp) {
  const auto& c = chain.config;
  json j;
  j["support"] = std::vector<double>(chain.support->scores().begin(), chain.support->scores().end());
  j["link"] = std::string(chain.link.name());
  j["mu0"] = chain.mu0;
  j["seed"] = chain.seed;
  j["stream_id"] = chain.stream_id;
  j["draws"] = chain.size();
  j["acceptance"] = {{"beta", chain.beta_stats.rate()}, {"f0", chain.f0_stats.rate()}};
  j["config"] = {{"n_iter", c.n_iter},
                 {"burn_in", c.burn_in},
                 {"rho", c.rho},
                 {"alpha", c.alpha},
                 {"H", c.H},
                 {"beta_update", name_of(c.beta_update)},
                 {"fisher_mode", name_of(c.fisher_mode)},
                 {"f0_weight_scale", name_of(c.f0_weight_scale)},
                 {"f0_move", name_of(c.f0_move)},
                 {"beta_truncation", name_of(c.beta_truncation)}};
  if (!timestamp.empty()) j["timestamp"] = timestamp;
  return j;
}

fs::path sidecar_path(const fs::path& chain_path) {
  fs::path out = chain_path;
  out.replace_extension(".json");
  return out;
}

PosteriorChain read_chain(const fs::path& chain_path) {
  json meta;
  try {
    meta = json::parse(read_file(sidecar_path(chain_path)));
  } catch (const json::exception& e) {
    fail(ErrorKind::invalid_input, "malformed chain sidecar: " + std::string(e.what()));
  }
  PosteriorChain chain;
  try {
    chain.support = make_support(meta.at("support").get<std::vector<double>>());
    chain.link = LinkSpec::parse(meta.at("link").get<std::string>());
    chain.mu0 = meta.at("mu0").get<double>();
    chain.seed = meta.at("seed").get<std::uint64_t>();
    chain.stream_id = meta.value("stream_id", std::uint64_t{0});
    const auto& c = meta.at("config");
    chain.config.n_iter = c.at("n_iter").get<int>();
    chain.config.burn_in = c.at("burn_in").get<int>();
    chain.config.rho = c.at("rho").get<double>();
    chain.config.alpha = c.at("alpha").get<double>();
    chain.config.H = c.at("H").get<std::vector<double>>();
  } catch (const json::exception& e) {
    fail(ErrorKind::invalid_input, "chain sidecar is missing a field: " + std::string(e.what()));
  }

  const Table t = read_table(chain_path);
  const std::size_t k = chain.support->size();
  const std::size_t p = t.header.size() >= k + 3 ? t.header.size() - k - 3 : 0;
  if (p == 0 || t.header.front() != "iter" || t.header[t.header.size() - 2] != "block")
    fail(ErrorKind::invalid_input, "unexpected chain header in " + chain_path.string());

  std::vector<std::vector<double>> beta_rows, f0_rows;
  std::vector<int> beta_acc, f0_acc;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    std::vector<double> vals(p + k);
    for (std::size_t c = 0; c < p + k; ++c) {
      auto v = to_double(row[c + 1]);
      if (!v) fail(ErrorKind::invalid_input, "chain row " + std::to_string(r + 1) + " has a non-numeric value");
      vals[c] = *v;
    }
    const std::string& block = row[p + k + 1];
    const int acc = std::stoi(row[p + k + 2]);
    if (block == "beta") {
      beta_acc.push_back(acc);
      if (beta_rows.empty()) beta_rows.push_back(vals);  // keeps f0_before_first
    } else if (block == "f0") {
      f0_rows.push_back(std::move(vals));
      f0_acc.push_back(acc);
    } else {
      fail(ErrorKind::invalid_input, "chain row " + std::to_string(r + 1) + " has unknown block '" + block + "'");
    }
  }
  const auto B = static_cast<Eigen::Index>(f0_rows.size());
  chain.beta.resize(B, static_cast<Eigen::Index>(p));
  chain.f0.resize(B, static_cast<Eigen::Index>(k));
  for (Eigen::Index b = 0; b < B; ++b)
    for (std::size_t c = 0; c < p + k; ++c) {
      const double v = f0_rows[static_cast<std::size_t>(b)][c];
      if (c < p)
        chain.beta(b, static_cast<Eigen::Index>(c)) = v;
      else
        chain.f0(b, static_cast<Eigen::Index>(c - p)) = v;
    }
  if (!beta_rows.empty()) {
    chain.f0_before_first.resize(static_cast<Eigen::Index>(k));
    for (std::size_t l = 0; l < k; ++l) chain.f0_before_first[static_cast<Eigen::Index>(l)] = beta_rows[0][p + l];
  }
  chain.beta_accepted = std::move(beta_acc);
  chain.f0_accepted = std::move(f0_acc);
  return chain;
}

json ml_fit_json(const MlFit& fit, double mu0) {
  json j;
  j["link"] = std::string(fit.link.name());
  j["mu0"] = mu0;
  j["beta_hat"] = std::vector<double>(fit.beta_hat.data(), fit.beta_hat.data() + fit.beta_hat.size());
  j["f0_hat"] = std::vector<double>(fit.f0_hat.probs().begin(), fit.f0_hat.probs().end());
  j["f0_raw"] = fit.f0_raw;
  std::vector<std::vector<double>> vcov;
  for (Eigen::Index r = 0; r < fit.vcov.rows(); ++r) {
    vcov.emplace_back();
    for (Eigen::Index c = 0; c < fit.vcov.cols(); ++c) vcov.back().push_back(fit.vcov(r, c));
  }
  j["vcov"] = vcov;
  j["loglik"] = fit.loglik;
  j["converged"] = fit.converged;
  j["iterations"] = fit.n_iters;
  j["grad_max_norm"] = fit.grad_max_norm;
  return j;
}

std::string prediction_csv(const std::vector<double>& y0s, const std::vector<FunctionalPosterior>& results) {
  std::ostringstream os;
  os << "row_id,y0,point,lower,upper\n";
  for (std::size_t r = 0; r < results.size(); ++r)
    os << r << ',' << fmt6(y0s[r]) << ',' << fmt6(results[r].point) << ',' << fmt6(results[r].lower) << ','
       << fmt6(results[r].upper) << '\n';
  return os.str();
}

std::string samples_csv(const std::vector<double>& samples) {
  std::ostringstream os;
  os << "draw,value\n";
  for (std::size_t b = 0; b < samples.size(); ++b) os << b << ',' << fmt_full(samples[b]) << '\n';
  return os.str();
}

std::map<std::string, std::string> parse_config(const std::string& text) {
  std::map<std::string, std::string> out;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      fail(ErrorKind::invalid_input, "config line " + std::to_string(lineno) + " is not key = value");
    std::string key = trim(line.substr(0, eq));
    while (!key.empty() && key.front() == '-') key.erase(key.begin());
    if (key.empty()) fail(ErrorKind::invalid_input, "config line " + std::to_string(lineno) + " has an empty key");
    out[key] = trim(line.substr(eq + 1));
  }
  return out;
}

}  // namespace dirspglm::io
