#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "entconv/entconv.hpp"

using nlohmann::json;

namespace {

struct GlobalOpts {
  int64_t depth = 1000;
  double nmax = 1e9;
  double tol = 1e-12;
  std::string format = "text";
  std::string precision = "double";
  uint64_t seed = 0;
};

struct ShowArgs {
  std::string spec;
  int64_t rows = 10;
};
struct CheckArgs {
  std::string a, b;
  std::string variant = "standard";
};
struct LoccArgs {
  std::string a, b;
  double eps = 0;
};
struct SloccArgs {
  std::string a, b;
  double p = -1;  // < 0 means "maximize"
};
struct MonoArgs {
  std::string a;
  std::string family = "power";
  std::string against;  // optional second spectrum: rank-order test
  bool force_numeric = false;
};
struct InhibitArgs {
  std::string a, b;
  int copies = 2;
  int64_t kmax = 64;
};
struct IngestArgs {
  std::string real_csv, imag_csv, out;
};

json config_json(const GlobalOpts& g) {
  json j;
  j["depth"] = g.depth;
  j["format"] = g.format;
  j["nmax"] = g.nmax;
  j["precision"] = g.precision;
  j["seed"] = g.seed;
  j["tol"] = g.tol;
  return j;
}

void emit_json(const json& j) { std::cout << j.dump() << "\n"; }

int verdict_exit(entconv::Verdict v) {
  switch (v) {
    case entconv::Verdict::Certified: return 0;
    case entconv::Verdict::Refuted: return 2;
    default: return 3;
  }
}

std::string fm(double v) { return entconv::detail::fmt_real(v); }

std::string iv_text(const json& pair) {
  std::string lo = pair[0].is_null() ? "-inf" : fm(pair[0].get<double>());
  std::string hi = pair[1].is_null() ? "inf" : fm(pair[1].get<double>());
  return "[" + lo + ", " + hi + "]";
}

void print_csv_row(const std::vector<std::string>& cells) {
  for (size_t i = 0; i < cells.size(); ++i)
    std::cout << cells[i] << (i + 1 < cells.size() ? "," : "\n");
}

template <class Real>
entconv::Spectrum<Real> load_spec(const std::string& arg) {
  if (!arg.empty() && arg.front() == '{') {
    json j;
    try {
      j = json::parse(arg);
    } catch (const json::parse_error& e) {
      throw entconv::domain_error(std::string("inline spec: ") + e.what());
    }
    return entconv::io::spectrum_from_json<Real>(j);
  }
  return entconv::io::load_spectrum<Real>(arg);
}

template <class Real>
entconv::CompareOptions compare_opts(const GlobalOpts& g) {
  entconv::CompareOptions c;
  c.scan_depth = g.depth;
  c.tol = g.tol;
  return c;
}

// ---- show ---------------------------------------------------------------

template <class Real>
int cmd_show(const GlobalOpts& g, const ShowArgs& a) {
  const auto s = load_spec<Real>(a.spec);
  const json body = entconv::io::show_json(s, a.rows);
  if (g.format == "json") {
    json out;
    out["config"] = config_json(g);
    out["spectrum"] = body;
    emit_json(out);
  } else if (g.format == "csv") {
    print_csv_row({"n", "lambda", "tail_lo", "tail_hi"});
    for (const auto& row : body["rows"])
      print_csv_row({std::to_string(row["n"].get<int64_t>()),
                     fm(row["lambda"].get<double>()),
                     fm(row["tail"][0].get<double>()),
                     fm(row["tail"][1].get<double>())});
  } else {
    std::cout << "kind: " << body["kind"].get<std::string>() << "\n";
    if (body["rank"].is_null())
      std::cout << "rank: infinite\n";
    else
      std::cout << "rank: " << body["rank"].get<int64_t>() << "\n";
    std::cout << "total: " << iv_text(body["total"]) << "\n";
    for (const auto& row : body["rows"])
      std::cout << "  n=" << row["n"].get<int64_t>()
                << "  lambda=" << fm(row["lambda"].get<double>())
                << "  E_n=" << iv_text(row["tail"]) << "\n";
  }
  return 0;
}

// ---- check ---------------------------------------------------------------

template <class Real>
int cmd_check(const GlobalOpts& g, const CheckArgs& a) {
  const auto x = load_spec<Real>(a.a);
  const auto y = load_spec<Real>(a.b);
  entconv::Relation rel;
  if (a.variant == "standard")
    rel = entconv::Relation::Standard;
  else if (a.variant == "sub")
    rel = entconv::Relation::Sub;
  else if (a.variant == "super")
    rel = entconv::Relation::Super;
  else
    throw entconv::domain_error("variant must be standard, sub, or super");
  const auto rep = entconv::compare(x, y, rel, compare_opts<Real>(g));
  const json body = entconv::io::compare_json(rep);
  if (g.format == "json") {
    json out;
    out["check"] = body;
    out["config"] = config_json(g);
    emit_json(out);
  } else if (g.format == "csv") {
    print_csv_row({"verdict", "relation", "checked_through", "witness_rank",
                   "margin", "used_tolerance", "method"});
    print_csv_row({body["verdict"].get<std::string>(),
                   body["relation"].get<std::string>(),
                   std::to_string(body["checked_through"].get<int64_t>()),
                   std::to_string(body["witness_rank"].get<int64_t>()),
                   body["margin"].is_null() ? "" : fm(body["margin"].get<double>()),
                   body["used_tolerance"].get<bool>() ? "1" : "0",
                   body["method"].get<std::string>()});
  } else {
    std::cout << "verdict: " << body["verdict"].get<std::string>() << " ("
              << body["relation"].get<std::string>() << ")\n"
              << "checked_through: " << body["checked_through"].get<int64_t>()
              << "\n"
              << "witness_rank: " << body["witness_rank"].get<int64_t>() << "\n"
              << "method: " << body["method"].get<std::string>() << "\n";
  }
  return verdict_exit(rep.verdict);
}

// ---- convert-locc ----------------------------------------------------------

template <class Real>
int cmd_convert_locc(const GlobalOpts& g, const LoccArgs& a) {
  const auto lam = load_spec<Real>(a.a);
  const auto mu = load_spec<Real>(a.b);
  const auto copts = compare_opts<Real>(g);
  const auto pre = entconv::decide_locc(lam, mu, copts);
  json out;
  out["config"] = config_json(g);
  out["check"] = entconv::io::compare_json(pre);
  if (pre.verdict != entconv::Verdict::Certified) {
    if (g.format == "json")
      emit_json(out);
    else
      std::cout << "conversion not certified: "
                << entconv::verdict_name(pre.verdict) << " ("
                << pre.method << ")\n";
    return verdict_exit(pre.verdict);
  }
  entconv::PlanOptions popts;
  popts.compare = copts;
  const auto plan = entconv::build_intermediate(lam, mu, Real(a.eps), popts);
  const json body = entconv::io::plan_json(plan, lam, mu);
  out["plan"] = body;
  if (g.format == "json") {
    emit_json(out);
  } else if (g.format == "csv") {
    print_csv_row({"n", "mu_prime", "source", "target"});
    for (const auto& row : body["levels"])
      print_csv_row({std::to_string(row["n"].get<int64_t>()),
                     fm(row["mu_prime"].get<double>()),
                     fm(row["source"].get<double>()),
                     fm(row["target"].get<double>())});
  } else {
    std::cout << "case: " << body["case"].get<std::string>() << "\n"
              << "n1: " << plan.n1 << "  n2: " << plan.n2
              << "  M: " << plan.big_m << "  N: " << plan.big_n << "\n"
              << "delta: " << fm(double(plan.delta))
              << "  plateau: " << fm(double(plan.plateau))
              << "  d: " << fm(double(plan.d_adjust)) << "\n"
              << "distance_bound: " << fm(double(plan.distance_bound))
              << "  fidelity_lower: " << fm(double(plan.fidelity_lower)) << "\n";
    for (const auto& line : plan.transcript) std::cout << "  " << line << "\n";
  }
  return 0;
}

// ---- convert-slocc ---------------------------------------------------------

template <class Real>
int cmd_convert_slocc(const GlobalOpts& g, const SloccArgs& a) {
  const auto lam = load_spec<Real>(a.a);
  const auto mu = load_spec<Real>(a.b);
  entconv::SloccOptions sopts;
  sopts.scan_depth = g.depth;
  sopts.compare = compare_opts<Real>(g);
  const auto mp = entconv::max_probability(lam, mu, sopts);
  json out;
  out["config"] = config_json(g);
  out["probability"] = entconv::io::prob_json(mp);
  int code;
  Real p_used = 0;
  if (a.p >= 0) {
    if (!(a.p > 0) || a.p > 1)
      throw entconv::domain_error("p must lie in (0, 1]");
    const auto chk =
        entconv::check_p_convertibility(lam, mu, Real(a.p), sopts.compare);
    out["check"] = entconv::io::compare_json(chk);
    code = verdict_exit(chk.verdict);
    p_used = Real(a.p);
  } else {
    switch (mp.status) {
      case entconv::ProbStatus::Exact:
        code = mp.p_upper == 0 ? 2 : 0;
        break;
      case entconv::ProbStatus::CertifiedZero: code = 2; break;
      default: code = 3; break;
    }
    p_used = mp.p_lower;
  }
  if (p_used > 0) {
    out["p_used"] = double(p_used);
    const auto nu = entconv::nu_spectrum(mu, p_used);
    const auto fc = entconv::filter_coefficients(mu, p_used);
    json nuj = json::array();
    const entconv::Index nrank = nu.rank_count();
    const entconv::Index keep =
        nrank == entconv::kInfiniteRank ? 16 : std::min<entconv::Index>(nrank, 16);
    for (entconv::Index n = 1; n <= keep; ++n)
      nuj.push_back(double(nu.value_at_rank(n)));
    out["nu"] = nuj;
    json fj;
    fj["head"] = double(fc.head);
    fj["rest"] = double(fc.rest);
    fj["raw_max"] = double(fc.raw_max);
    fj["success"] = double(fc.success);
    out["filter"] = fj;
  }
  if (g.format == "json") {
    emit_json(out);
  } else if (g.format == "csv") {
    print_csv_row({"n", "e_lambda_lo", "e_lambda_hi", "e_mu_lo", "e_mu_hi",
                   "ratio_lo", "ratio_hi", "binding"});
    for (const auto& row : out["probability"]["rows"]) {
      auto cell = [&](const json& v) {
        return v.is_null() ? std::string("inf") : fm(v.get<double>());
      };
      print_csv_row({std::to_string(row["n"].get<int64_t>()),
                     cell(row["e_lambda"][0]), cell(row["e_lambda"][1]),
                     cell(row["e_mu"][0]), cell(row["e_mu"][1]),
                     cell(row["ratio"][0]), cell(row["ratio"][1]),
                     row["binding"].get<bool>() ? "1" : "0"});
    }
  } else {
    std::cout << "p_lower: " << fm(double(mp.p_lower))
              << "  p_upper: " << fm(double(mp.p_upper)) << "\n"
              << "status: " << entconv::prob_status_name(mp.status)
              << "  witness: " << mp.witness_index << "\n"
              << "method: " << mp.method << "\n";
    if (out.contains("check"))
      std::cout << "requested p: " << fm(a.p) << " -> "
                << out["check"]["verdict"].get<std::string>() << "\n";
    if (out.contains("filter"))
      std::cout << "filter: head=1 rest=" << fm(out["filter"]["rest"].get<double>())
                << " success=" << fm(out["filter"]["success"].get<double>())
                << "\n";
  }
  return code;
}

// ---- monotone ---------------------------------------------------------------

template <class Real>
int cmd_monotone(const GlobalOpts& g, const MonoArgs& a) {
  const auto s = load_spec<Real>(a.a);
  const auto fam = entconv::rate_family<Real>(a.family);
  entconv::MonotoneOptions mopts;
  mopts.n_max = g.nmax;
  mopts.force_numeric = a.force_numeric;
  json out;
  out["config"] = config_json(g);
  int code = 0;
  if (!a.against.empty()) {
    const auto t = load_spec<Real>(a.against);
    const auto rep = entconv::order_check(s, t, fam, mopts);
    out["order"] = entconv::io::order_json(rep);
    switch (rep.verdict) {
      case entconv::OrderVerdict::ConvertibleCertified: code = 0; break;
      case entconv::OrderVerdict::BlockedCertified: code = 2; break;
      default: code = 3; break;
    }
    if (g.format == "json") {
      emit_json(out);
    } else {
      std::cout << "order: " << entconv::order_verdict_name(rep.verdict) << "\n"
                << "  " << rep.note << "\n";
    }
    return code;
  }
  const auto est = entconv::estimate_R(s, fam, mopts);
  out["estimate"] = entconv::io::estimate_json(est);
  code = est.inconclusive_trend ? 3 : 0;
  if (g.format == "json") {
    emit_json(out);
  } else if (g.format == "csv") {
    print_csv_row({"r", "n", "log10_g"});
    for (const auto& row : out["estimate"]["evidence"])
      print_csv_row({fm(row["r"].get<double>()), fm(row["n"].get<double>()),
                     row["log10_g"].is_null() ? "-inf"
                                              : fm(row["log10_g"].get<double>())});
  } else {
    std::cout << "family: " << fam.name() << "\n"
              << "R-: " << iv_text(out["estimate"]["r_minus"]) << "\n"
              << "R+: " << iv_text(out["estimate"]["r_plus"]) << "\n"
              << "method: "
              << out["estimate"]["method"].get<std::string>() << "\n";
    if (!est.note.empty()) std::cout << "note: " << est.note << "\n";
  }
  return code;
}

// ---- inhibit ------------------------------------------------------------------

template <class Real>
int cmd_inhibit(const GlobalOpts& g, const InhibitArgs& a) {
  const auto src = load_spec<Real>(a.a);
  if (src.kind() != entconv::SpectrumKind::Geometric)
    throw entconv::domain_error(
        "inhibit: the source spec must be geometric (kind \"geometric\")");
  const auto tgt = load_spec<Real>(a.b);
  entconv::SloccOptions sopts;
  sopts.scan_depth = g.depth;
  sopts.compare = compare_opts<Real>(g);
  const auto rep =
      entconv::check_inhibition(src.param_q(), a.copies, tgt, a.kmax, sopts);
  json out;
  out["config"] = config_json(g);
  out["inhibition"] = entconv::io::inhibition_json(rep, a.kmax);
  int code;
  switch (rep.conversion.status) {
    case entconv::ProbStatus::CertifiedZero: code = 2; break;
    case entconv::ProbStatus::Exact:
      code = rep.conversion.p_upper == 0 ? 2 : 0;
      break;
    default: code = 3; break;
  }
  if (g.format == "json") {
    emit_json(out);
  } else if (g.format == "csv") {
    print_csv_row({"k", "s", "log_f", "verbatim_bound", "robust_bound",
                   "verbatim_ok", "robust_ok"});
    for (const auto& row : out["inhibition"]["rows"])
      print_csv_row({std::to_string(row["k"].get<int64_t>()),
                     std::to_string(row["s"].get<int64_t>()),
                     fm(row["log_f"].get<double>()),
                     fm(row["verbatim_bound"].get<double>()),
                     fm(row["robust_bound"].get<double>()),
                     row["verbatim_ok"].get<bool>() ? "1" : "0",
                     row["robust_ok"].get<bool>() ? "1" : "0"});
  } else {
    std::cout << "copies: " << rep.copies << "  q: " << fm(double(rep.q)) << "\n"
              << "verbatim violations: " << rep.verbatim_violations << " of "
              << rep.rows.size() << " ranks\n"
              << "robust bound: " << (rep.robust_all_ok ? "holds" : "FAILS")
              << "\n"
              << "conversion: "
              << entconv::prob_status_name(rep.conversion.status)
              << " p in [" << fm(double(rep.conversion.p_lower)) << ", "
              << fm(double(rep.conversion.p_upper)) << "]\n"
              << "note: " << rep.note << "\n";
  }
  return code;
}

// ---- ingest -------------------------------------------------------------------

template <class Real>
int cmd_ingest(const GlobalOpts& g, const IngestArgs& a) {
  entconv::Index rows = 0, cols = 0;
  const auto amps = entconv::io::amplitudes_from_csv<Real>(a.real_csv, a.imag_csv,
                                                           rows, cols);
  const auto res = entconv::schmidt_from_amplitudes<Real>(amps, rows, cols);
  std::vector<double> values;
  values.reserve(res.coefficients.size());
  for (Real c : res.coefficients) values.push_back(double(c));
  const json spec = entconv::io::finite_spec_json(values);
  if (!a.out.empty()) {
    std::ofstream f(a.out);
    if (!f) throw entconv::domain_error("cannot write: " + a.out);
    f << spec.dump() << "\n";
  }
  json out;
  out["config"] = config_json(g);
  out["frobenius"] = double(res.frobenius);
  out["output"] = a.out.empty() ? json(nullptr) : json(a.out);
  out["rank"] = int64_t(res.coefficients.size());
  out["renormalized"] = res.renormalized;
  out["spectrum"] = spec;
  out["sweeps"] = res.sweeps;
  if (g.format == "json") {
    emit_json(out);
  } else if (g.format == "csv") {
    print_csv_row({"n", "value"});
    for (size_t i = 0; i < values.size(); ++i)
      print_csv_row({std::to_string(i + 1), fm(values[i])});
  } else {
    std::cout << "rows: " << rows << "  cols: " << cols << "\n"
              << "schmidt rank: " << values.size() << "\n"
              << "frobenius: " << fm(double(res.frobenius))
              << (res.renormalized ? " (renormalized)" : "") << "\n";
    if (!a.out.empty()) std::cout << "spec written: " << a.out << "\n";
  }
  return 0;
}

template <class Real>
int dispatch(const std::string& cmd, const GlobalOpts& g, const ShowArgs& sa,
             const CheckArgs& ca, const LoccArgs& la, const SloccArgs& pa,
             const MonoArgs& ma, const InhibitArgs& ia, const IngestArgs& ga) {
  if (cmd == "show") return cmd_show<Real>(g, sa);
  if (cmd == "check") return cmd_check<Real>(g, ca);
  if (cmd == "convert-locc") return cmd_convert_locc<Real>(g, la);
  if (cmd == "convert-slocc") return cmd_convert_slocc<Real>(g, pa);
  if (cmd == "monotone") return cmd_monotone<Real>(g, ma);
  if (cmd == "inhibit") return cmd_inhibit<Real>(g, ia);
  if (cmd == "ingest") return cmd_ingest<Real>(g, ga);
  throw entconv::domain_error("unknown command: " + cmd);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Schmidt-spectrum conversion toolkit"};
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("--depth", g.depth, "tail scan depth")->check(CLI::PositiveNumber);
  app.add_option("--nmax", g.nmax, "largest rank for monotone grids")
      ->check(CLI::PositiveNumber);
  app.add_option("--tol", g.tol, "comparison tolerance")->check(CLI::PositiveNumber);
  app.add_option("--format", g.format, "output format")
      ->check(CLI::IsMember({"text", "json", "csv"}));
  app.add_option("--precision", g.precision, "floating point mode")
      ->check(CLI::IsMember({"double", "extended"}));
  app.add_option("--seed", g.seed, "seed echoed into reports for replay");

  ShowArgs sa;
  auto* show = app.add_subcommand("show", "print a spectrum table");
  show->fallthrough();
  show->add_option("spec", sa.spec, "spectrum spec (file or inline JSON)")
      ->required();
  show->add_option("--rows", sa.rows, "table rows")->check(CLI::PositiveNumber);

  CheckArgs ca;
  auto* check = app.add_subcommand("check", "majorization decision A against B");
  check->fallthrough();
  check->add_option("a", ca.a, "left spectrum")->required();
  check->add_option("b", ca.b, "right spectrum")->required();
  check->add_option("--variant", ca.variant, "standard | sub | super")
      ->check(CLI::IsMember({"standard", "sub", "super"}));

  LoccArgs la;
  auto* clocc = app.add_subcommand(
      "convert-locc", "deterministic conversion plan within epsilon");
  clocc->fallthrough();
  clocc->add_option("a", la.a, "source spectrum")->required();
  clocc->add_option("b", la.b, "target spectrum")->required();
  clocc->add_option("eps", la.eps, "trace-distance budget")->required();

  SloccArgs pa;
  auto* cslocc = app.add_subcommand(
      "convert-slocc", "maximal conversion probability and filter");
  cslocc->fallthrough();
  cslocc->add_option("a", pa.a, "source spectrum")->required();
  cslocc->add_option("b", pa.b, "target spectrum")->required();
  cslocc->add_option("p", pa.p, "check a specific probability instead");

  MonoArgs ma;
  auto* mono = app.add_subcommand("monotone", "extended rank estimate");
  mono->fallthrough();
  mono->add_option("a", ma.a, "spectrum")->required();
  mono->add_option("--family", ma.family, "rate family: power | squeeze")
      ->check(CLI::IsMember({"power", "squeeze"}));
  mono->add_option("--against", ma.against,
                   "second spectrum: certified rank-order test");
  mono->add_flag("--force-numeric", ma.force_numeric,
                 "bypass closed-form classification");

  InhibitArgs ia;
  auto* inhibit = app.add_subcommand(
      "inhibit", "amplitude decay of copies of A against target B");
  inhibit->fallthrough();
  inhibit->add_option("a", ia.a, "geometric source spectrum")->required();
  inhibit->add_option("b", ia.b, "target spectrum")->required();
  inhibit->add_option("--copies", ia.copies, "tensor copies")
      ->check(CLI::PositiveNumber);
  inhibit->add_option("--kmax", ia.kmax, "ranks to tabulate")
      ->check(CLI::PositiveNumber);

  IngestArgs ga;
  auto* ingest = app.add_subcommand(
      "ingest", "Schmidt spectrum from amplitude CSV (rows = first subsystem)");
  ingest->fallthrough();
  ingest->add_option("real", ga.real_csv, "real part CSV")->required();
  ingest->add_option("imag", ga.imag_csv, "imaginary part CSV");
  ingest->add_option("-o,--out", ga.out, "write finite spec JSON here");

  CLI11_PARSE(app, argc, argv);
  const std::string cmd = app.get_subcommands().front()->get_name();

  try {
    if (g.precision == "extended")
      return dispatch<long double>(cmd, g, sa, ca, la, pa, ma, ia, ga);
    return dispatch<double>(cmd, g, sa, ca, la, pa, ma, ia, ga);
  } catch (const entconv::budget_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const entconv::domain_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
