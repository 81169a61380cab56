#include "covar/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <sstream>

#include "covar/calculus.hpp"
#include "covar/density.hpp"
#include "covar/error.hpp"
#include "covar/integrate.hpp"
#include "covar/physics.hpp"
#include "json.hpp"

namespace covar::cli {

namespace {

namespace pt = boost::property_tree;
using Json = nlohmann::ordered_json;

// ---- small text helpers -----------------------------------------------------------

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  if (out.size() == 1 && out[0].empty()) out.clear();
  return out;
}

/// "name(a, b)" -> {"name", {"a", "b"}}
std::optional<std::pair<std::string, std::vector<std::string>>> indexed_key(const std::string& key) {
  const auto open = key.find('(');
  if (open == std::string::npos || key.back() != ')') return std::nullopt;
  return std::make_pair(trim(key.substr(0, open)),
                        split(std::string_view(key).substr(open + 1, key.size() - open - 2), ','));
}

std::string sci(double v) {
  std::ostringstream os;
  os << std::scientific << std::setprecision(3) << v;
  return os.str();
}

// ---- configuration --------------------------------------------------------------------

/// Read-only view of one INI section. Keys are matched literally (no path syntax).
class Section {
 public:
  Section(std::string name, const pt::ptree* tree) : name_(std::move(name)), tree_(tree) {}

  bool present() const { return tree_ != nullptr; }
  const std::string& name() const { return name_; }

  std::optional<std::string> get(std::string_view key) const {
    if (!tree_) return std::nullopt;
    for (const auto& [k, v] : *tree_)
      if (k == key) return trim(v.data());
    return std::nullopt;
  }
  std::string get_or(std::string_view key, std::string fallback) const {
    return get(key).value_or(std::move(fallback));
  }
  std::string require(std::string_view key) const {
    auto v = get(key);
    if (!v) throw ConfigError("[" + name_ + "] is missing the key '" + std::string(key) + "'");
    return *v;
  }
  std::vector<std::pair<std::string, std::string>> entries() const {
    std::vector<std::pair<std::string, std::string>> out;
    if (tree_)
      for (const auto& [k, v] : *tree_) out.emplace_back(k, trim(v.data()));
    return out;
  }

 private:
  std::string name_;
  const pt::ptree* tree_;
};

bool parse_bool(const Section& s, std::string_view key, bool fallback) {
  const auto v = s.get(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "yes" || *v == "1") return true;
  if (*v == "false" || *v == "no" || *v == "0") return false;
  throw ConfigError("[" + s.name() + "] " + std::string(key) + ": expected true or false, got '" +
                    *v + "'");
}

int parse_int(const std::string& text, const std::string& where) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(text, &used);
    if (used == text.size()) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError(where + ": expected an integer, got '" + text + "'");
}

/// Everything a recipe needs, built and validated from the config.
struct Context {
  pt::ptree tree;
  std::string recipe;
  std::map<std::string, double, std::less<>> params;
  std::optional<CoordinateChart> chart;
  std::optional<GridSpec> grid;
  std::optional<MetricField> metric_analytic;
  bool metric_sampled = false;
  struct FieldEntry {
    TensorDensityField field;
    bool sampled;
  };
  std::map<std::string, FieldEntry, std::less<>> fields;
  std::optional<double> tolerance_override;

  Section section(const std::string& name) const {
    auto child = tree.get_child_optional(pt::ptree::path_type(name, '\x1f'));
    return Section(name, child ? &*child : nullptr);
  }
  Section recipe_section() const { return section("recipe"); }

  SymbolTable symbols_for(const CoordinateChart& c) const {
    SymbolTable t = c.symbols();
    t.constants.insert(params.begin(), params.end());
    return t;
  }

  Expr expression(const std::string& text, const CoordinateChart& c,
                  const std::string& where) const {
    try {
      return parse(text, symbols_for(c));
    } catch (const ParseError& e) {
      throw ConfigError(where + ": " + e.what() + " in '" + text + "'");
    }
  }

  double constant(const std::string& text, const std::string& where) const {
    SymbolTable t;
    t.constants.insert(params.begin(), params.end());
    try {
      const Expr e = parse(text, t);
      return e.eval({});
    } catch (const ParseError& e) {
      throw ConfigError(where + ": " + e.what() + " in '" + text + "'");
    } catch (const DomainError& e) {
      throw ConfigError(where + ": " + e.what());
    }
  }

  std::vector<double> constants(const std::string& text, const std::string& where) const {
    std::vector<double> out;
    for (const auto& item : split(text, ',')) out.push_back(constant(item, where));
    return out;
  }

  MetricField metric_on(const GridSpec& g) const {
    return metric_sampled ? metric_analytic->sampled_on(g) : *metric_analytic;
  }
  MetricField metric() const { return metric_on(*grid); }

  TensorDensityField field_on(const std::string& name, const GridSpec& g) const {
    auto it = fields.find(name);
    if (it == fields.end()) throw ConfigError("no [field:" + name + "] section");
    return it->second.sampled ? it->second.field.sampled_on(g) : it->second.field;
  }
  TensorDensityField field(const std::string& name) const { return field_on(name, *grid); }
  TensorDensityField field_param(const std::string& key, const std::string& fallback) const {
    return field(recipe_section().get_or(key, fallback));
  }

  bool all_analytic() const {
    if (metric_sampled) return false;
    for (const auto& [name, f] : fields)
      if (f.sampled) return false;
    return true;
  }

  double tolerance(double analytic_default, double fd_default) const {
    if (tolerance_override) return *tolerance_override;
    if (auto t = recipe_section().get("tolerance")) return constant(*t, "[recipe] tolerance");
    return all_analytic() ? analytic_default : fd_default;
  }

  Quadrature quadrature() const {
    const auto q = recipe_section().get_or("quadrature", "trapezoid");
    if (q == "trapezoid") return Quadrature::Trapezoid;
    if (q == "simpson") return Quadrature::Simpson;
    throw ConfigError("[recipe] quadrature: expected trapezoid or simpson, got '" + q + "'");
  }

  RegionSpec region_on(const GridSpec& g) const {
    const Section s = section("region");
    if (!s.present()) return RegionSpec(g);
    const auto lo = constants(s.require("lower"), "[region] lower");
    const auto hi = constants(s.require("upper"), "[region] upper");
    return RegionSpec(g, lo, hi);
  }
};

CoordinateChart parse_chart(const Context& ctx, const Section& s) {
  const auto names = split(s.require("coordinates"), ',');
  const auto lower = ctx.constants(s.require("lower"), "[" + s.name() + "] lower");
  const auto upper = ctx.constants(s.require("upper"), "[" + s.name() + "] upper");
  std::vector<bool> periodic(names.size(), false);
  for (const auto& p : split(s.get_or("periodic", ""), ',')) {
    const auto it = std::find(names.begin(), names.end(), p);
    if (it == names.end())
      throw ConfigError("[" + s.name() + "] periodic names an unknown coordinate '" + p + "'");
    periodic[it - names.begin()] = true;
  }
  std::vector<std::vector<double>> singular(names.size());
  for (const auto& [key, value] : s.entries()) {
    const auto ik = indexed_key(key);
    if (!ik || ik->first != "singular") continue;
    if (ik->second.size() != 1) throw ConfigError("[" + s.name() + "] " + key + ": one coordinate");
    const auto it = std::find(names.begin(), names.end(), ik->second[0]);
    if (it == names.end())
      throw ConfigError("[" + s.name() + "] " + key + ": unknown coordinate");
    singular[it - names.begin()] = ctx.constants(value, "[" + s.name() + "] " + key);
  }
  try {
    return CoordinateChart(names, lower, upper, periodic, singular);
  } catch (const GeometryError& e) {
    throw ConfigError("[" + s.name() + "] " + e.what());
  }
}

/// Component expressions keyed like `name(a, b)`; missing components are 0.
/// `mirror`: +1 copies a(b, a) from a(a, b) when absent, -1 copies its negative.
std::vector<Expr> parse_components(const Context& ctx, const Section& s, const std::string& name,
                                   int rank, const CoordinateChart& chart, int mirror) {
  const int d = chart.dim();
  std::vector<Expr> comps(component_count(d, rank));
  std::vector<bool> given(comps.size(), false);
  for (const auto& [key, value] : s.entries()) {
    const std::string where = "[" + s.name() + "] " + key;
    if (rank == 0 && key == "value") {
      comps[0] = ctx.expression(value, chart, where);
      given[0] = true;
      continue;
    }
    const auto ik = indexed_key(key);
    if (!ik || ik->first != name) continue;
    if (static_cast<int>(ik->second.size()) != rank)
      throw ConfigError(where + ": expected " + std::to_string(rank) + " coordinate indices");
    std::vector<int> idx;
    for (const auto& c : ik->second) {
      const int a = chart.axis_of(c);
      if (a < 0) throw ConfigError(where + ": unknown coordinate '" + c + "'");
      idx.push_back(a);
    }
    const int flat = flat_index(idx, d);
    comps[flat] = ctx.expression(value, chart, where);
    given[flat] = true;
  }
  if (mirror != 0 && rank == 2)
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b)
        if (given[a * d + b] && !given[b * d + a])
          comps[b * d + a] = mirror > 0 ? comps[a * d + b] : -comps[a * d + b];
  return comps;
}

IndexSignature parse_indices(const Section& s) {
  const std::string type = s.get_or("type", "");
  if (type == "scalar") return {};
  if (type == "vector") return {Slot::Up};
  if (type == "covector") return {Slot::Down};
  if (!type.empty() && type != "tensor")
    throw ConfigError("[" + s.name() + "] type: expected scalar, vector, covector or tensor");
  IndexSignature sig;
  for (const auto& i : split(s.get_or("indices", ""), ',')) {
    if (i == "up") sig.push_back(Slot::Up);
    else if (i == "down") sig.push_back(Slot::Down);
    else throw ConfigError("[" + s.name() + "] indices: expected up/down, got '" + i + "'");
  }
  if (sig.size() > 4) throw ConfigError("[" + s.name() + "] supports at most 4 indices");
  return sig;
}

void load(Context& ctx, const Options& opt) {
  try {
    pt::read_ini(opt.config, ctx.tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(e.what());
  }

  for (const auto& [k, v] : ctx.section("params").entries())
    ctx.params[k] = ctx.constant(v, "[params] " + k);

  const Section recipe = ctx.recipe_section();
  ctx.recipe = recipe.require("name");
  static const std::vector<std::string> kRecipes = {
      "christoffel", "divergence", "antisym-div", "density-cov", "transform",
      "killing",     "current",    "gauss-check", "mass"};
  if (std::find(kRecipes.begin(), kRecipes.end(), ctx.recipe) == kRecipes.end())
    throw ConfigError("unknown recipe '" + ctx.recipe + "'");

  const Section metric = ctx.section("metric");
  if (!metric.present()) throw ConfigError("config needs a [metric] section");
  const auto preset_name = metric.get("preset");
  PresetParams pp;
  if (preset_name)
    for (const auto& [k, v] : metric.entries())
      if (k != "preset" && k != "sampled") pp.values[k] = v;

  const Section chart_sec = ctx.section("chart");
  try {
    if (chart_sec.present()) {
      ctx.chart = parse_chart(ctx, chart_sec);
    } else if (preset_name) {
      PresetParams folded = pp;
      for (auto& [k, v] : folded.values)
        if (k == "M") v = Expr::constant(ctx.constant(v, "[metric] M")).str();
      ctx.chart = preset_chart(*preset_name, folded);
    } else {
      throw ConfigError("config needs a [chart] section or a metric preset");
    }

    const Section grid = ctx.section("grid");
    std::vector<int> points(ctx.chart->dim(), 17);
    if (auto p = grid.get("points")) {
      const auto items = split(*p, ',');
      if (items.size() == 1) {
        points.assign(ctx.chart->dim(), parse_int(items[0], "[grid] points"));
      } else if (static_cast<int>(items.size()) == ctx.chart->dim()) {
        for (std::size_t i = 0; i < items.size(); ++i)
          points[i] = parse_int(items[i], "[grid] points");
      } else {
        throw ConfigError("[grid] points: give one count or one per coordinate");
      }
    }
    if (opt.resolution) points.assign(ctx.chart->dim(), *opt.resolution);
    int order = parse_int(grid.get_or("order", "4"), "[grid] order");
    if (opt.order) order = *opt.order;
    if (order != 2 && order != 4) throw ConfigError("[grid] order must be 2 or 4");
    ctx.grid.emplace(*ctx.chart, points, order);

    if (preset_name) {
      // Preset parameters may reference [params]; fold them to plain text first.
      PresetParams folded;
      for (const auto& [k, v] : pp.values)
        folded.values[k] = ctx.expression(v, *ctx.chart, "[metric] " + k).str();
      ctx.metric_analytic = preset(*preset_name, folded,
                                   chart_sec.present() ? std::optional(*ctx.chart) : std::nullopt);
      if (!chart_sec.present()) ctx.chart = ctx.metric_analytic->chart();
    } else {
      const auto sig = ctx.constants(metric.require("signature"), "[metric] signature");
      if (sig.size() != 2)
        throw ConfigError("[metric] signature: expected 'negative, positive' counts");
      auto comps = parse_components(ctx, metric, "g", 2, *ctx.chart, +1);
      ctx.metric_analytic = MetricField::from_expressions(
          *ctx.chart, std::move(comps),
          Signature{static_cast<int>(sig[0]), static_cast<int>(sig[1])});
    }
    ctx.metric_sampled = parse_bool(metric, "sampled", false);

    for (const auto& [name, sub] : ctx.tree) {
      if (name.rfind("field:", 0) != 0) continue;
      const Section s(name, &sub);
      const std::string fname = trim(name.substr(6));
      const IndexSignature sig = parse_indices(s);
      const double weight = ctx.constant(s.get_or("weight", "0"), "[" + name + "] weight");
      int mirror = 0;
      if (parse_bool(s, "antisymmetric", false)) mirror = -1;
      if (parse_bool(s, "symmetric", false)) mirror = +1;
      auto comps = parse_components(ctx, s, fname, static_cast<int>(sig.size()), *ctx.chart, mirror);
      ctx.fields.emplace(fname, Context::FieldEntry{
                                    TensorDensityField::from_expressions(*ctx.chart, sig, weight,
                                                                         std::move(comps)),
                                    parse_bool(s, "sampled", false)});
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  ctx.tolerance_override = opt.tolerance;
}

// ---- report -------------------------------------------------------------------------

class Report {
 public:
  Report(std::string recipe, Channel channel) : recipe_(std::move(recipe)), channel_(channel) {}

  void check(const std::string& name, const std::string& identity, double value, double bound,
             Json extra = Json::object()) {
    const bool pass = std::isfinite(value) && value <= bound;
    ok_ = ok_ && pass;
    Json j = header(name, identity);
    j["value"] = value;
    j["tolerance"] = bound;
    j["pass"] = pass;
    for (auto& [k, v] : extra.items()) j[k] = v;
    lines_.push_back(std::move(j));
    summary_ << (pass ? "[PASS] " : "[FAIL] ") << name << ": " << sci(value)
             << (pass ? " <= " : " > ") << sci(bound) << "\n";
  }

  void info(const std::string& name, const std::string& identity, Json data) {
    Json j = header(name, identity);
    for (auto& [k, v] : data.items()) j[k] = v;
    lines_.push_back(std::move(j));
  }

  void warn(const std::string& text) {
    Json j{{"recipe", recipe_}, {"warning", text}};
    lines_.push_back(std::move(j));
    summary_ << "[WARN] " << text << "\n";
  }

  void note(const std::string& text) { summary_ << "       " << text << "\n"; }

  bool ok() const { return ok_; }

  void write(const std::filesystem::path& dir, std::ostream& out) const {
    std::filesystem::create_directories(dir);
    std::ofstream f(dir / "report.jsonl");
    if (!f) throw Error("cannot write " + (dir / "report.jsonl").string());
    for (const auto& j : lines_) f << j.dump() << "\n";
    out << "recipe " << recipe_ << " (" << channel_name(channel_) << " derivatives)\n"
        << summary_.str() << "result: " << (ok_ ? "PASS" : "FAIL") << "\n";
  }

 private:
  Json header(const std::string& name, const std::string& identity) const {
    return Json{{"recipe", recipe_},
                {"check", name},
                {"eq", identity},
                {"channel", std::string(channel_name(channel_))}};
  }

  std::string recipe_;
  Channel channel_;
  std::vector<Json> lines_;
  std::ostringstream summary_;
  bool ok_ = true;
};

double relative(double diff, double scale) { return diff / std::max(1.0, scale); }

std::vector<double> chart_center(const CoordinateChart& c) {
  std::vector<double> x(c.dim());
  for (int a = 0; a < c.dim(); ++a) x[a] = 0.5 * (c.lower(a) + c.upper(a));
  return x;
}

Json component_table(const std::vector<double>& values, int rank, const CoordinateChart& chart) {
  Json t = Json::object();
  std::array<int, 8> idx{};
  for (std::size_t c = 0; c < values.size(); ++c) {
    if (values[c] == 0.0) continue;
    unflat_index(static_cast<int>(c), rank, chart.dim(), std::span<int>(idx.data(), rank));
    std::string key;
    for (int k = 0; k < rank; ++k) key += (k ? "," : "") + chart.name(idx[k]);
    t[key.empty() ? "value" : key] = values[c];
  }
  return t;
}

/// Field values at the chart center (analytic) or the central lattice node (sampled).
std::vector<double> probe_values(const TensorDensityField& f, const GridSpec& g) {
  if (f.is_analytic()) return f.values_at(chart_center(f.chart()));
  std::array<int, kMaxDim> mid{};
  for (int a = 0; a < g.dim(); ++a) mid[a] = g.points(a) / 2;
  std::vector<double> v(f.components());
  f.values_at_node(g, g.flatten(std::span<const int>(mid.data(), g.dim())), v);
  return v;
}

StressEnergyField stress_from(const Context& ctx, const MetricField& m, const GridSpec& g) {
  const std::string spec = ctx.recipe_section().get_or("stress", "T");
  if (spec.rfind("scalar:", 0) == 0) {
    const double scale = ctx.constant(ctx.recipe_section().get_or("scale", "1/(4*pi)"),
                                      "[recipe] scale");
    return scalar_stress_energy(ctx.field_on(trim(spec.substr(7)), g), m, scale);
  }
  const auto t = ctx.field_on(spec, g);
  return StressEnergyField(t, t.is_analytic() ? &g : nullptr);
}

// ---- recipes --------------------------------------------------------------------------

void recipe_christoffel(const Context& ctx, Report& rep) {
  const auto m = ctx.metric();
  const auto& g = *ctx.grid;
  const double tol = ctx.tolerance(1e-10, 1e-6);
  const auto tr = christoffel_trace(m);
  const double scale = max_abs(tr.log_sqrt_g_gradient, g);
  rep.check("trace-identity", "christoffel-trace",
            relative(max_abs_difference(tr.contracted, tr.log_sqrt_g_gradient, g), scale), tol);
  const auto gamma = christoffel(m).components();
  rep.info("christoffel-table", "christoffel-symbols",
           Json{{"max_abs", max_abs(gamma, g)},
                {"point", m.is_analytic() ? Json(chart_center(m.chart())) : Json("central node")},
                {"components", component_table(probe_values(gamma, g), 3, m.chart())}});
}

void recipe_divergence(const Context& ctx, Report& rep) {
  const auto m = ctx.metric();
  const auto& g = *ctx.grid;
  const double tol = ctx.tolerance(1e-8, 1e-6);
  const auto p = ctx.field_param("field", "P");
  const auto a = divergence_vector(p, m, DivergenceRoute::Christoffel);
  const auto b = divergence_vector(p, m, DivergenceRoute::SqrtG);
  const double scale = max_abs(a, g);
  rep.check("dual-route", "vector-divergence", relative(max_abs_difference(a, b, g), scale), tol);
  rep.info("divergence", "vector-divergence", Json{{"max_abs", scale}});
  if (parse_bool(ctx.recipe_section(), "expect_zero", false))
    rep.check("divergence-vanishes", "vector-divergence", max_abs(b, g), tol);
}

void recipe_antisym(const Context& ctx, Report& rep) {
  const auto m = ctx.metric();
  const auto& g = *ctx.grid;
  const double tol = ctx.tolerance(1e-10, 1e-6);
  const auto f = ctx.field_param("field", "F");
  const auto r = divergence_antisymmetric(f, m, &g);
  const double scale = max_abs(r.full, g);
  rep.check("dual-route", "antisymmetric-divergence",
            relative(max_abs_difference(r.divergence, r.full, g), scale), tol);
  rep.check("connection-term-vanishes", "antisymmetric-connection-term",
            max_abs(r.vanishing_term, g), tol);
  rep.info("antisymmetry", "antisymmetric-divergence",
           Json{{"max_symmetric_part", r.max_symmetric_part}, {"max_abs_divergence", scale}});
  if (parse_bool(ctx.recipe_section(), "expect_zero", false))
    rep.check("divergence-vanishes", "antisymmetric-divergence", max_abs(r.divergence, g), tol);
}

void recipe_density_cov(const Context& ctx, Report& rep) {
  const auto m = ctx.metric();
  const auto& g = *ctx.grid;
  const double tol = ctx.tolerance(1e-10, 1e-6);
  const auto weights = ctx.constants(ctx.recipe_section().get_or("weights", "-2, -1, 1, 2"),
                                     "[recipe] weights");
  const auto one = TensorDensityField::scalar(m.chart(), Expr::constant(1.0));
  for (double w : weights) {
    const auto power = densitize(one, m, w);
    const double scale = max_abs(partial_gradient(power), g);
    std::ostringstream name;
    name << "sqrtg-power-" << w;
    rep.check(name.str(), "density-covariant-derivative",
              relative(max_abs(covariant_derivative(power, m), g), scale), tol,
              Json{{"weight", w}});
  }
  if (auto name = ctx.recipe_section().get("field")) {
    const auto f = ctx.field(*name);
    const auto cov = covariant_derivative(f, m);
    rep.info("field-derivative", "density-covariant-derivative",
             Json{{"field", *name},
                  {"weight", f.weight()},
                  {"max_abs", max_abs(cov, g)},
                  {"components_at_probe", component_table(probe_values(cov, g), f.rank() + 1,
                                                          m.chart())}});
    if (f.rank() == 0 && f.weight() == 0.0)
      rep.check("scalar-gradient", "density-covariant-derivative",
                max_abs_difference(cov, partial_gradient(f), g), 0.0);
    if (parse_bool(ctx.recipe_section(), "expect_zero", false))
      rep.check("field-derivative-vanishes", "density-covariant-derivative", max_abs(cov, g), tol);
  }
}

void recipe_transform(const Context& ctx, Report& rep) {
  const auto m = *ctx.metric_analytic;
  const auto& g = *ctx.grid;
  const double tol = ctx.tolerance(1e-10, 1e-10);
  const Section target_sec = ctx.section("target_chart");
  if (!target_sec.present()) throw ConfigError("transform needs a [target_chart] section");
  const CoordinateChart target = parse_chart(ctx, target_sec);
  const Section map_sec = ctx.section("map");
  std::vector<Expr> fwd(target.dim()), inv(m.dim());
  std::vector<bool> have_f(target.dim()), have_i(m.dim());
  for (const auto& [key, value] : map_sec.entries()) {
    const auto ik = indexed_key(key);
    if (!ik || ik->second.size() != 1) throw ConfigError("[map] unexpected key '" + key + "'");
    if (ik->first == "forward") {
      const int a = target.axis_of(ik->second[0]);
      if (a < 0) throw ConfigError("[map] " + key + ": not a target coordinate");
      fwd[a] = ctx.expression(value, m.chart(), "[map] " + key);
      have_f[a] = true;
    } else if (ik->first == "inverse") {
      const int a = m.chart().axis_of(ik->second[0]);
      if (a < 0) throw ConfigError("[map] " + key + ": not a source coordinate");
      inv[a] = ctx.expression(value, target, "[map] " + key);
      have_i[a] = true;
    } else {
      throw ConfigError("[map] unexpected key '" + key + "'");
    }
  }
  if (std::count(have_f.begin(), have_f.end(), false) || std::count(have_i.begin(), have_i.end(), false))
    throw ConfigError("[map] needs forward(...) for every target and inverse(...) for every source "
                      "coordinate");
  const ChartMap map(m.chart(), target, fwd, inv);
  rep.check("round-trip", "chart-map", map.round_trip_error(), ChartMap::kRoundTripTolerance);
  rep.check("determinant-weight", "metric-determinant-weight",
            determinant_weight_check(m, map).max_relative_deviation, tol);

  const std::string fname = ctx.recipe_section().get_or("field", "metric");
  const auto f = fname == "metric" ? metric_tensor(m) : ctx.fields.at(fname).field;
  const auto out = transform_density(f, map);
  rep.info("transformed", "density-transform",
           Json{{"field", fname},
                {"weight", f.weight()},
                {"point", chart_center(target)},
                {"components", component_table(out.values_at(chart_center(target)), f.rank(),
                                               target)}});
  const Section expect = ctx.section("expect");
  if (expect.present()) {
    const auto want = parse_components(ctx, expect, "T", f.rank(), target, 0);
    double worst = 0.0;
    for (const auto& p : random_points(target, 100, 23)) {
      const std::span<const double> x(p.data(), target.dim());
      const auto got = out.values_at(x);
      for (std::size_t c = 0; c < got.size(); ++c) {
        const double w = want[c].eval(x);
        worst = std::max(worst, relative(std::abs(got[c] - w), std::abs(w)));
      }
    }
    rep.check("expected-components", "density-transform", worst, tol);
  }
  if (f.weight() != 0.0) {
    const auto back = restore_weight(normalize_weight(f, m), m, f.weight());
    rep.check("weight-round-trip", "weight-normalization",
              relative(max_abs_difference(back, f, g), max_abs(f, g)), std::max(tol, 1e-13));
  }
}

void recipe_killing(const Context& ctx, Report& rep) {
  const auto m = ctx.metric();
  const auto& g = *ctx.grid;
  const double tol = ctx.tolerance(1e-10, 1e-6);
  const auto k = ctx.field_param("field", "k");
  const auto r = killing_residual(k, m, g, tol);
  rep.info("killing", "killing-equation",
           Json{{"max_residual", r.max_norm}, {"lie_mismatch", r.lie_mismatch}});
  if (parse_bool(ctx.recipe_section(), "expect_killing", true))
    rep.check("killing-residual", "killing-equation", r.max_norm, tol);
  rep.check("lie-consistency", "lie-derivative", relative(r.lie_mismatch, r.max_norm), tol);
}

/// Through-flux at the lower and upper faces of `axis` (both counted in the +axis direction).
std::pair<double, double> through_flux(const TensorDensityField& p, const MetricField& m,
                                       const RegionSpec& region, int axis, Quadrature q) {
  return {-face_flux(p, m, region, Face{axis, -1, 1}, q), face_flux(p, m, region, Face{axis, 1, 1}, q)};
}

int flux_axis(const Context& ctx, const RegionSpec& region) {
  if (auto name = ctx.recipe_section().get("flux_axis")) {
    const int a = region.grid().chart().axis_of(*name);
    if (a < 0) throw ConfigError("[recipe] flux_axis: unknown coordinate '" + *name + "'");
    return a;
  }
  if (!region.faces().empty()) return region.faces().front().axis;
  throw ConfigError("region has no bounding faces");
}

void recipe_current(const Context& ctx, Report& rep) {
  const auto m = ctx.metric();
  const auto& g = *ctx.grid;
  const double tol = ctx.tolerance(1e-9, 1e-6);
  const auto k = ctx.field_param("field", "k");
  const auto t = stress_from(ctx, m, g);
  const auto cur = conserved_current(k, t, m, g, tol);
  for (const auto& w : cur.warnings) rep.warn(w);

  const double eps_t = max_abs(stress_energy_divergence(t, m), g);
  const double t_max = max_abs(t.up(), g);
  const auto k_low = lower_index(k, m, 0);
  std::vector<double> kv(k.dim());
  double k_max = 0.0;
  for (std::size_t node = 0; node < g.size(); ++node) {
    k_low.values_at_node(g, node, kv);
    double s = 0.0;
    for (double v : kv) s += std::abs(v);
    k_max = std::max(k_max, s);
  }
  const int d = k.dim();
  const double bound = 0.5 * d * d * cur.killing_residual * t_max + k_max * eps_t + tol;
  const double div = max_abs(divergence_vector(cur.current, m, DivergenceRoute::SqrtG), g);
  rep.check("current-divergence", "conserved-current", div, bound,
            Json{{"stress_divergence", eps_t},
                 {"killing_residual", cur.killing_residual},
                 {"k_max", k_max},
                 {"killing_term_max", max_abs(cur.killing_term, g)},
                 {"conservation_term_max", max_abs(cur.conservation_term, g)}});

  const RegionSpec region = ctx.region_on(g);
  const Quadrature q = ctx.quadrature();
  const int axis = flux_axis(ctx, region);
  const auto [lo, hi] = through_flux(cur.current, m, region, axis, q);
  const double flux_tol =
      ctx.constant(ctx.recipe_section().get_or("flux_tolerance", "1e-6"), "[recipe] flux_tolerance");
  rep.check("flux-agreement", "conserved-current-flux",
            std::abs(hi - lo) / std::max({1.0, std::abs(lo), std::abs(hi)}), flux_tol,
            Json{{"axis", g.chart().name(axis)}, {"flux_lower", lo}, {"flux_upper", hi}});
}

void recipe_gauss(const Context& ctx, Report& rep) {
  const double tol = ctx.tolerance(1e-6, 1e-6);
  const Quadrature q = ctx.quadrature();
  const std::string name = ctx.recipe_section().get_or("field", "P");
  const int levels = parse_int(ctx.recipe_section().get_or("refinements", "1"),
                               "[recipe] refinements");
  if (levels < 1 || levels > 4) throw ConfigError("[recipe] refinements must be 1 to 4");
  const GridSpec& base = *ctx.grid;
  const RegionSpec base_region = ctx.region_on(base);

  std::vector<GaussReport> runs;
  for (int level = 0; level < levels; ++level) {
    std::vector<int> pts = base.points();
    for (int a = 0; a < base.dim(); ++a) {
      if (base_region.collapsed(a)) continue;
      pts[a] = base.chart().periodic(a) ? pts[a] << level : ((pts[a] - 1) << level) + 1;
    }
    const GridSpec g(base.chart(), pts, base.order());
    const RegionSpec region = ctx.region_on(g);
    const auto r = gauss_check(ctx.field_on(name, g), ctx.metric_on(g), region, q);
    runs.push_back(r);
    rep.info("gauss-level", "gauss-law",
             Json{{"lhs", r.lhs},
                  {"rhs", r.rhs},
                  {"residual", r.residual},
                  {"resolution", r.resolution},
                  {"order", r.order},
                  {"quadrature", std::string(quadrature_name(q))}});
  }
  const GaussReport& last = runs.back();
  rep.check("gauss-law", "gauss-law", last.residual, tol,
            Json{{"lhs", last.lhs},
                 {"rhs", last.rhs},
                 {"residual", last.residual},
                 {"resolution", last.resolution},
                 {"order", last.order}});
  if (levels >= 2) {
    const auto& a = runs[runs.size() - 2];
    const double measured = std::log2(a.residual / last.residual);
    rep.info("convergence", "gauss-law", Json{{"measured_order", measured}, {"expected_order", last.order}});
    if (parse_bool(ctx.recipe_section(), "check_order", false))
      rep.check("convergence-order", "gauss-law", std::abs(measured - last.order), 0.3,
                Json{{"measured_order", measured}, {"expected_order", last.order}});
  }
}

void recipe_mass(const Context& ctx, Report& rep) {
  const auto m = ctx.metric();
  const auto& g = *ctx.grid;
  const double tol = ctx.tolerance(1e-8, 1e-6);
  const auto k = ctx.field_param("field", "k");
  const auto t = stress_from(ctx, m, g);
  const RegionSpec region = ctx.region_on(g);
  MassOptions opt;
  opt.quadrature = ctx.quadrature();
  const Section s = ctx.recipe_section();
  if (auto v = s.get("prefactor")) opt.prefactor = ctx.constant(*v, "[recipe] prefactor");
  if (auto v = s.get("trace_coefficient"))
    opt.trace_coefficient = ctx.constant(*v, "[recipe] trace_coefficient");
  opt.killing_tolerance = tol;
  const auto r = mass_integral(t, k, m, region, opt);
  for (const auto& w : r.warnings) rep.warn(w);
  rep.info("mass", "mass-integral",
           Json{{"mass", r.mass},
                {"killing_residual", r.killing_residual},
                {"slice_axis", g.chart().name(r.slice_axis)},
                {"prefactor", opt.prefactor},
                {"trace_coefficient", opt.trace_coefficient}});
  rep.note("mass = " + sci(r.mass));
  if (auto v = s.get("expect")) {
    const double want = ctx.constant(*v, "[recipe] expect");
    rep.check("mass-value", "mass-integral", relative(std::abs(r.mass - want), std::abs(want)), tol,
              Json{{"mass", r.mass}, {"expected", want}});
  }
  const StressEnergyField doubled(scaled(t.up(), 2.0), t.up().is_analytic() ? &g : nullptr);
  const double m2 = mass_integral(doubled, k, m, region, opt).mass;
  rep.check("linearity", "mass-integral", relative(std::abs(m2 - 2.0 * r.mass), std::abs(r.mass)),
            1e-13);
}

}  // namespace

int run(const Options& options, std::ostream& out, std::ostream& err) {
  Context ctx;
  try {
    load(ctx, options);
  } catch (const std::exception& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfigError;
  }

  const std::map<std::string, std::function<void(const Context&, Report&)>> recipes = {
      {"christoffel", recipe_christoffel}, {"divergence", recipe_divergence},
      {"antisym-div", recipe_antisym},     {"density-cov", recipe_density_cov},
      {"transform", recipe_transform},     {"killing", recipe_killing},
      {"current", recipe_current},         {"gauss-check", recipe_gauss},
      {"mass", recipe_mass}};

  const Section top("", &ctx.tree);
  const std::filesystem::path dir =
      options.output.value_or(top.get("output").value_or("covar-report"));
  Report rep(ctx.recipe, ctx.all_analytic() ? Channel::Analytic : Channel::FiniteDifference);
  try {
    recipes.at(ctx.recipe)(ctx, rep);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitCheckFailed;
  }
  try {
    rep.write(dir, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitCheckFailed;
  }
  return rep.ok() ? kExitOk : kExitCheckFailed;
}

int main(int argc, char** argv) {
  CLI::App app{"Verifies covariant-calculus identities on metrics sampled over structured grids"};
  Options opt;
  app.add_option("--config", opt.config, "INI run configuration")->required();
  app.add_option("--output", opt.output, "directory for report.jsonl");
  app.add_option("--tolerance", opt.tolerance, "override the recipe tolerance");
  app.add_option("--resolution", opt.resolution, "points on every grid axis")
      ->check(CLI::Range(5, 4096));
  app.add_option("--order", opt.order, "finite-difference order")->check(CLI::IsMember({2, 4}));
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfigError;
  }
  return run(opt, std::cout, std::cerr);
}

}  // namespace covar::cli
