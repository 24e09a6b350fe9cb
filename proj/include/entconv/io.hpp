#ifndef ENTCONV_IO_HPP
#define ENTCONV_IO_HPP

#include <complex>
#include <fstream>
#include <istream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "entconv/locc.hpp"
#include "entconv/majorization.hpp"
#include "entconv/rank_monotone.hpp"
#include "entconv/slocc.hpp"
#include "entconv/spectrum.hpp"
#include "entconv/svd.hpp"
#include "entconv/util.hpp"

namespace entconv {
namespace io {

using nlohmann::json;

// ---- spectrum specification files -------------------------------------------

template <class Real>
Spectrum<Real> spectrum_from_json(const json& j) {
  if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string())
    throw domain_error("spectrum spec: object with a string \"kind\" required");
  const std::string kind = j["kind"].get<std::string>();
  auto num = [&](const char* key) -> Real {
    if (!j.contains(key) || !j[key].is_number())
      throw domain_error(std::string("spectrum spec: \"") + kind +
                         "\" needs numeric \"" + key + "\"");
    return Real(j[key].get<double>());
  };
  if (kind == "geometric") return Spectrum<Real>::geometric(num("q"));
  if (kind == "power_law") return Spectrum<Real>::power_law(num("r"));
  if (kind == "log_power") return Spectrum<Real>::log_power(num("t"));
  if (kind == "finite") {
    if (!j.contains("values") || !j["values"].is_array())
      throw domain_error("spectrum spec: \"finite\" needs a \"values\" array");
    std::vector<Real> v;
    for (const auto& x : j["values"]) {
      if (!x.is_number())
        throw domain_error("spectrum spec: \"values\" must be numeric");
      v.push_back(Real(x.get<double>()));
    }
    return Spectrum<Real>::finite(std::move(v));
  }
  if (kind == "tensor_power") {
    if (!j.contains("base"))
      throw domain_error("spectrum spec: \"tensor_power\" needs \"base\"");
    if (!j.contains("copies") || !j["copies"].is_number_integer())
      throw domain_error("spectrum spec: \"tensor_power\" needs integer \"copies\"");
    return Spectrum<Real>::tensor_power(spectrum_from_json<Real>(j["base"]),
                                        int(j["copies"].get<int64_t>()));
  }
  throw domain_error("spectrum spec: unknown kind \"" + kind + "\"");
}

template <class Real>
Spectrum<Real> load_spectrum(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw domain_error("cannot open spectrum spec: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw domain_error(path + ": " + e.what());
  }
  return spectrum_from_json<Real>(j);
}

inline json finite_spec_json(const std::vector<double>& values) {
  json j;
  j["kind"] = "finite";
  j["values"] = values;
  return j;
}

// ---- CSV ---------------------------------------------------------------------

// Rows of comma-separated reals; blank lines skipped. Diagnostics carry
// 1-based line and column positions.
inline std::vector<std::vector<double>> parse_csv_matrix(std::istream& in,
                                                         const std::string& name) {
  std::vector<std::vector<double>> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    bool blank = true;
    for (char c : line)
      if (!std::isspace(static_cast<unsigned char>(c))) blank = false;
    if (blank) continue;
    std::vector<double> row;
    size_t pos = 0;
    int col = 1;
    while (true) {
      size_t comma = line.find(',', pos);
      const std::string cell =
          line.substr(pos, comma == std::string::npos ? comma : comma - pos);
      try {
        size_t used = 0;
        const double v = std::stod(cell, &used);
        while (used < cell.size() &&
               std::isspace(static_cast<unsigned char>(cell[used])))
          ++used;
        if (used != cell.size()) throw std::invalid_argument(cell);
        row.push_back(v);
      } catch (const std::exception&) {
        throw domain_error(name + ": line " + std::to_string(lineno) +
                           ", column " + std::to_string(col) +
                           ": not a number: \"" + cell + "\"");
      }
      if (comma == std::string::npos) break;
      pos = comma + 1;
      ++col;
    }
    if (!rows.empty() && rows.front().size() != row.size())
      throw domain_error(name + ": line " + std::to_string(lineno) +
                         ": expected " + std::to_string(rows.front().size()) +
                         " columns, found " + std::to_string(row.size()));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw domain_error(name + ": no data rows");
  return rows;
}

// One CSV of real amplitudes, or a pair (real, imaginary) of equal shape.
template <class Real>
std::vector<std::complex<Real>> amplitudes_from_csv(
    const std::string& real_path, const std::string& imag_path, Index& rows_out,
    Index& cols_out) {
  std::ifstream rein(real_path);
  if (!rein) throw domain_error("cannot open CSV: " + real_path);
  const auto re = parse_csv_matrix(rein, real_path);
  std::vector<std::vector<double>> im;
  if (!imag_path.empty()) {
    std::ifstream imin(imag_path);
    if (!imin) throw domain_error("cannot open CSV: " + imag_path);
    im = parse_csv_matrix(imin, imag_path);
    if (im.size() != re.size() || im.front().size() != re.front().size())
      throw domain_error("imaginary CSV shape differs from real CSV");
  }
  rows_out = Index(re.size());
  cols_out = Index(re.front().size());
  std::vector<std::complex<Real>> a;
  a.reserve(size_t(rows_out * cols_out));
  for (size_t i = 0; i < re.size(); ++i)
    for (size_t j = 0; j < re[i].size(); ++j)
      a.emplace_back(Real(re[i][j]), im.empty() ? Real(0) : Real(im[i][j]));
  return a;
}

// ---- JSON report builders ----------------------------------------------------

template <class Real>
json interval_json(const Interval<Real>& v) {
  json j = json::array();
  j.push_back(double(v.lo));
  if (std::isfinite(double(v.hi)))
    j.push_back(double(v.hi));
  else
    j.push_back(nullptr);
  return j;
}

template <class Real>
json compare_json(const CompareReport<Real>& r) {
  json j;
  j["verdict"] = verdict_name(r.verdict);
  j["relation"] = relation_name(r.relation);
  j["checked_through"] = r.checked_through;
  j["witness_rank"] = r.witness_rank;
  j["margin"] = std::isfinite(double(r.margin)) ? json(double(r.margin))
                                                : json(nullptr);
  j["used_tolerance"] = r.used_tolerance;
  j["method"] = r.method;
  return j;
}

template <class Real>
json show_json(const Spectrum<Real>& s, Index rows,
               const EvalBudget& budget = {}) {
  json j;
  j["kind"] = kind_name(s.kind());
  j["rank"] = s.rank_count() == kInfiniteRank ? json(nullptr)
                                              : json(s.rank_count());
  j["total"] = interval_json(s.total(budget).iv());
  json table = json::array();
  const Index first = s.first_index();
  const Index last = s.rank_count() == kInfiniteRank
                         ? first + rows - 1
                         : std::min(s.rank_count(), first + rows - 1);
  for (Index n = first; n <= last; ++n) {
    json row;
    row["n"] = n;
    row["lambda"] = double(s.value_at_rank(n));
    row["tail"] = interval_json(s.tail_at_rank(n, budget).iv());
    table.push_back(row);
  }
  j["rows"] = table;
  return j;
}

template <class Real>
json prob_json(const ProbabilityVerdict<Real>& v, Index max_rows = 64) {
  json j;
  j["p_lower"] = double(v.p_lower);
  j["p_upper"] = double(v.p_upper);
  j["status"] = prob_status_name(v.status);
  j["witness_index"] = v.witness_index;
  j["method"] = v.method;
  json rows = json::array();
  const Index keep = std::min<Index>(Index(v.rows.size()), max_rows);
  for (Index i = 0; i < keep; ++i) {
    const auto& r = v.rows[size_t(i)];
    json row;
    row["n"] = r.n;
    row["e_lambda"] = interval_json(r.e_lambda);
    row["e_mu"] = interval_json(r.e_mu);
    row["ratio"] = json::array();
    row["ratio"].push_back(std::isfinite(double(r.ratio.lo))
                               ? json(double(r.ratio.lo))
                               : json(nullptr));
    row["ratio"].push_back(std::isfinite(double(r.ratio.hi))
                               ? json(double(r.ratio.hi))
                               : json(nullptr));
    row["binding"] = r.binding;
    rows.push_back(row);
  }
  j["rows"] = rows;
  j["rows_truncated"] = Index(v.rows.size()) > keep;
  return j;
}

template <class Real>
json plan_json(const ConversionPlan<Real>& p, const Spectrum<Real>& lambda,
               const Spectrum<Real>& mu) {
  json j;
  j["case"] = plan_case_name(p.tag);
  j["n1"] = p.n1;
  j["n2"] = p.n2;
  j["big_m"] = p.big_m;
  j["big_n"] = p.big_n;
  j["delta"] = double(p.delta);
  j["plateau"] = double(p.plateau);
  j["d_adjust"] = double(p.d_adjust);
  j["distance_bound"] = double(p.distance_bound);
  j["fidelity_lower"] = double(p.fidelity_lower);
  j["cert_lambda_muprime"] = compare_json(p.cert_lambda_muprime);
  j["cert_muprime_mu"] = compare_json(p.cert_muprime_mu);
  j["total"] = interval_json(p.mu_prime.total().iv());
  json tt = json::array();
  for (const auto& t : p.finite_transcript) {
    json e;
    e["i"] = t.i;
    e["j"] = t.j;
    e["t"] = t.t;
    tt.push_back(e);
  }
  j["t_transforms"] = tt;
  j["notes"] = p.transcript;
  // level samples around the stitch points show the construction shape
  json levels = json::array();
  std::vector<Index> marks = {1, 2, 3};
  for (Index base : {p.n1, p.n2, p.big_m})
    for (Index d = -1; d <= 1; ++d)
      if (base + d >= 1) marks.push_back(base + d);
  std::sort(marks.begin(), marks.end());
  marks.erase(std::unique(marks.begin(), marks.end()), marks.end());
  const Index prank = p.mu_prime.rank_count();
  for (Index n : marks) {
    if (prank != kInfiniteRank && n > prank) break;
    json row;
    row["n"] = n;
    row["mu_prime"] = double(p.mu_prime.value_at_rank(n));
    row["source"] = double(lambda.value_at_rank(n));
    row["target"] =
        (mu.rank_count() != kInfiniteRank && n > mu.rank_count())
            ? 0.0
            : double(mu.value_at_rank(n));
    levels.push_back(row);
  }
  j["levels"] = levels;
  return j;
}

template <class Real>
json estimate_json(const MonotoneEstimate<Real>& e) {
  json j;
  j["r_minus"] = interval_json(e.r_minus);
  j["r_plus"] = interval_json(e.r_plus);
  j["method"] = estimate_method_name(e.method);
  j["inconclusive_trend"] = e.inconclusive_trend;
  j["note"] = e.note;
  json rows = json::array();
  for (const auto& t : e.evidence) {
    json row;
    row["r"] = double(t.r);
    row["n"] = double(t.n);
    row["log10_g"] = std::isfinite(double(t.log10_g))
                         ? json(double(t.log10_g))
                         : json(nullptr);
    rows.push_back(row);
  }
  j["evidence"] = rows;
  return j;
}

template <class Real>
json order_json(const OrderReport<Real>& r) {
  json j;
  j["verdict"] = order_verdict_name(r.verdict);
  j["source"] = estimate_json(r.source);
  j["target"] = estimate_json(r.target);
  j["note"] = r.note;
  return j;
}

template <class Real>
json inhibition_json(const InhibitionReport<Real>& r, Index max_rows = 64) {
  json j;
  j["q"] = double(r.q);
  j["copies"] = r.copies;
  j["verbatim_violations"] = r.verbatim_violations;
  j["robust_all_ok"] = r.robust_all_ok;
  j["conversion"] = prob_json(r.conversion);
  j["note"] = r.note;
  json rows = json::array();
  const Index keep = std::min<Index>(Index(r.rows.size()), max_rows);
  for (Index i = 0; i < keep; ++i) {
    const auto& row = r.rows[size_t(i)];
    json e;
    e["k"] = row.k;
    e["s"] = row.s;
    e["log_f"] = double(row.log_f);
    e["verbatim_bound"] = double(row.verbatim_bound);
    e["robust_bound"] = double(row.robust_bound);
    e["verbatim_ok"] = row.verbatim_ok;
    e["robust_ok"] = row.robust_ok;
    rows.push_back(e);
  }
  j["rows"] = rows;
  j["rows_truncated"] = Index(r.rows.size()) > keep;
  return j;
}

}  // namespace io
}  // namespace entconv

#endif
