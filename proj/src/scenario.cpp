#include "mscale/scenario.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <sstream>

namespace mscale {

// ---------------------------------------------------------------------------
// spec builders

ConvexFunction FunctionSpec::build() const {
  if (kind == "zero") return ConvexFunction::zero(dim);
  if (kind == "quadratic") return ConvexFunction::quadratic(a, b, r);
  if (kind == "abs") return ConvexFunction::absolute_sum(dim);
  if (kind == "indicator_affine") return ConvexFunction::indicator_affine(a, b);
  if (kind == "indicator_box") return ConvexFunction::indicator_box(lo, hi);
  if (kind == "sqdist_affine") return ConvexFunction::sq_dist_to_affine(a, b);
  if (kind == "sqdist_box") return ConvexFunction::sq_dist_to_box(lo, hi);
  if (kind == "support_ball") return ConvexFunction::support_of_ball(dim, radius);
  if (kind == "least_squares") return ConvexFunction::least_squares(a, b);
  throw InvalidInput("unknown function kind: " + kind);
}

MonotoneOperator OperatorSpec::build() const {
  if (kind == "affine") return MonotoneOperator::affine(m, q);
  if (kind == "rotation2d") return MonotoneOperator::rotation2d(angle);
  throw InvalidInput("unknown operator kind: " + kind);
}

Schedule ScheduleSpec::build(Schedule::Direction dir) const {
  if (kind == "power") return Schedule::power_law(a, exponent, dir);
  if (kind == "exp") return Schedule::exponential(a, exponent, dir);
  if (kind == "constant") return Schedule::constant(a, dir);
  if (kind == "log") return Schedule::logarithmic(a, dir);
  throw InvalidInput("unknown schedule kind: " + kind);
}

Schedule Scenario::build_schedule() const {
  if (parameterization == "beta") return schedule.build(Schedule::Direction::Beta);
  if (parameterization == "epsilon") return schedule.build(Schedule::Direction::Epsilon);
  if (parameterization == "epsilon_dictionary")
    return Schedule::dictionary_epsilon(schedule.build(Schedule::Direction::Beta));
  throw InvalidInput("unknown parameterization: " + parameterization);
}

Problem Scenario::build_problem() const {
  if (problem_kind == "monotone") {
    require(op.has_value(), "scenario: monotone problem needs an [operator] section");
    return Problem::monotone(op->build(), psi.build(), build_schedule());
  }
  require(phi.has_value(), "scenario: gradient problem needs a [phi] section");
  const Parameterization p =
      parameterization == "beta" ? Parameterization::Beta : Parameterization::Epsilon;
  return Problem::gradient(phi->build(), psi.build(), build_schedule(), p);
}

std::vector<TheoremTag> Scenario::theorem_tags() const {
  std::vector<TheoremTag> out;
  out.reserve(tags.size());
  for (const std::string& t : tags) {
    const auto tag = parse_theorem_tag(t);
    require(tag.has_value(), "scenario: unknown theorem tag: " + t);
    out.push_back(*tag);
  }
  return out;
}

ScheduleSpec parse_schedule_spec(const std::string& text) {
  std::istringstream ss(text);
  std::string kind;
  ss >> kind;
  ScheduleSpec spec;
  if (kind == "const") kind = "constant";
  spec.kind = kind;
  double a = 0.0;
  if (!(ss >> a)) throw InvalidInput("schedule spec needs a scale, e.g. \"power 1 2\"");
  spec.a = a;
  if (kind == "power" || kind == "exp") {
    if (!(ss >> spec.exponent)) throw InvalidInput("schedule spec \"" + kind + "\" needs an exponent/rate");
  }
  if (kind != "power" && kind != "exp" && kind != "constant" && kind != "log")
    throw InvalidInput("unknown schedule kind: " + kind);
  return spec;
}

// ---------------------------------------------------------------------------
// parser

namespace {

struct Entry {
  std::string value;
  int line = 0;
  mutable bool used = false;
};

using Section = std::map<std::string, Entry>;

struct RawFile {
  std::map<std::string, Section> sections;
  std::map<std::string, int> section_lines;
};

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

class Reader {
 public:
  explicit Reader(const std::string& text) {
    std::istringstream ss(text);
    std::string line;
    int ln = 0;
    std::string section;
    while (std::getline(ss, line)) {
      ++ln;
      const std::string t = trim(line.substr(0, line.find('#')));
      if (t.empty()) continue;
      if (t.front() == '[') {
        if (t.back() != ']') {
          diag(ln, "malformed section header: " + t);
          continue;
        }
        section = t.substr(1, t.size() - 2);
        raw_.section_lines.emplace(section, ln);
        raw_.sections[section];
        continue;
      }
      const auto eq = t.find('=');
      if (eq == std::string::npos) {
        diag(ln, "expected key = value: " + t);
        continue;
      }
      const std::string key = trim(t.substr(0, eq));
      const std::string value = trim(t.substr(eq + 1));
      if (section.empty()) {
        diag(ln, "key outside any [section]: " + key);
        continue;
      }
      if (key.empty() || value.empty()) {
        diag(ln, "empty key or value");
        continue;
      }
      raw_.sections[section].emplace(key, Entry{value, ln, false});
    }
  }

  bool has_section(const std::string& s) const { return raw_.sections.count(s) > 0; }

  const Entry* find(const std::string& section, const std::string& key) const {
    auto sit = raw_.sections.find(section);
    if (sit == raw_.sections.end()) return nullptr;
    auto kit = sit->second.find(key);
    if (kit == sit->second.end()) return nullptr;
    kit->second.used = true;
    return &kit->second;
  }

  std::optional<double> number(const std::string& sec, const std::string& key) {
    const Entry* e = find(sec, key);
    if (!e) return std::nullopt;
    double v = 0.0;
    const char* first = e->value.data();
    const char* last = first + e->value.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) {
      diag(e->line, "key " + key + ": expected a number, got: " + e->value);
      return std::nullopt;
    }
    return v;
  }

  std::optional<std::string> str(const std::string& sec, const std::string& key) {
    const Entry* e = find(sec, key);
    if (!e) return std::nullopt;
    if (e->value.size() < 2 || e->value.front() != '"' || e->value.back() != '"') {
      diag(e->line, "key " + key + ": expected a quoted string, got: " + e->value);
      return std::nullopt;
    }
    return e->value.substr(1, e->value.size() - 2);
  }

  std::optional<Vec> array(const std::string& sec, const std::string& key) {
    const Entry* e = find(sec, key);
    if (!e) return std::nullopt;
    const std::string& v = e->value;
    if (v.size() < 2 || v.front() != '[' || v.back() != ']') {
      diag(e->line, "key " + key + ": expected a bracketed array, got: " + v);
      return std::nullopt;
    }
    std::vector<double> vals;
    std::string body = v.substr(1, v.size() - 2);
    std::istringstream ss(body);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      tok = trim(tok);
      if (tok.empty()) continue;
      double x = 0.0;
      auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), x);
      if (ec != std::errc() || ptr != tok.data() + tok.size()) {
        diag(e->line, "key " + key + ": bad array element: " + tok);
        return std::nullopt;
      }
      vals.push_back(x);
    }
    Vec out(static_cast<Eigen::Index>(vals.size()));
    for (size_t i = 0; i < vals.size(); ++i) out[static_cast<Eigen::Index>(i)] = vals[i];
    return out;
  }

  std::optional<Mat> matrix(const std::string& sec, const std::string& key) {
    const auto flat = array(sec, key);
    if (!flat) return std::nullopt;
    const auto rows_d = number(sec, key + "_rows");
    if (!rows_d) {
      diag(line_of(sec, key), "matrix " + key + " needs a companion " + key + "_rows key");
      return std::nullopt;
    }
    const auto rows = static_cast<Eigen::Index>(*rows_d);
    if (rows <= 0 || *rows_d != static_cast<double>(rows) || flat->size() % rows != 0) {
      diag(line_of(sec, key + "_rows"), "key " + key + "_rows: inconsistent row count");
      return std::nullopt;
    }
    const Eigen::Index cols = flat->size() / rows;
    Mat m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = (*flat)[i * cols + j];
    return m;
  }

  int line_of(const std::string& sec, const std::string& key) const {
    auto sit = raw_.sections.find(sec);
    if (sit == raw_.sections.end()) return 0;
    auto kit = sit->second.find(key);
    return kit == sit->second.end() ? section_line(sec) : kit->second.line;
  }

  int section_line(const std::string& sec) const {
    auto it = raw_.section_lines.find(sec);
    return it == raw_.section_lines.end() ? 0 : it->second;
  }

  void diag(int line, const std::string& msg) { diagnostics.push_back({line, msg}); }

  void flag_unknown(const std::vector<std::string>& known_sections) {
    for (const auto& [sec, entries] : raw_.sections) {
      if (std::find(known_sections.begin(), known_sections.end(), sec) == known_sections.end()) {
        diag(section_line(sec), "unknown section: [" + sec + "]");
        continue;
      }
      for (const auto& [key, entry] : entries)
        if (!entry.used) diag(entry.line, "unknown key in [" + sec + "]: " + key);
    }
  }

  std::vector<Diagnostic> diagnostics;

 private:
  RawFile raw_;
};

FunctionSpec read_function(Reader& r, const std::string& sec, std::vector<Diagnostic>& diags) {
  FunctionSpec spec;
  const auto kind = r.str(sec, "kind");
  if (!kind) {
    diags.push_back({r.section_line(sec), "[" + sec + "] needs a kind key"});
    return spec;
  }
  spec.kind = *kind;
  auto need_number = [&](const char* key, double& out) {
    if (auto v = r.number(sec, key))
      out = *v;
    else
      diags.push_back({r.section_line(sec), "[" + sec + "] kind " + spec.kind + " needs key " + key});
  };
  auto need_vec = [&](const char* key, Vec& out) {
    if (auto v = r.array(sec, key))
      out = *v;
    else
      diags.push_back({r.section_line(sec), "[" + sec + "] kind " + spec.kind + " needs key " + key});
  };
  auto need_mat = [&](const char* key, Mat& out) {
    if (auto v = r.matrix(sec, key))
      out = *v;
    else
      diags.push_back({r.section_line(sec), "[" + sec + "] kind " + spec.kind + " needs matrix key " + key});
  };

  if (spec.kind == "zero" || spec.kind == "abs") {
    double d = 0;
    need_number("dim", d);
    spec.dim = static_cast<Eigen::Index>(d);
  } else if (spec.kind == "quadratic") {
    need_mat("q", spec.a);
    need_vec("c", spec.b);
    if (auto v = r.number(sec, "r")) spec.r = *v;
  } else if (spec.kind == "indicator_affine" || spec.kind == "sqdist_affine" || spec.kind == "least_squares") {
    need_mat("a", spec.a);
    need_vec("b", spec.b);
  } else if (spec.kind == "indicator_box" || spec.kind == "sqdist_box") {
    need_vec("lo", spec.lo);
    need_vec("hi", spec.hi);
  } else if (spec.kind == "support_ball") {
    double d = 0;
    need_number("dim", d);
    spec.dim = static_cast<Eigen::Index>(d);
    need_number("radius", spec.radius);
  } else {
    diags.push_back({r.line_of(sec, "kind"), "unknown function kind: " + spec.kind});
  }
  return spec;
}

}  // namespace

ParseOutcome parse_scenario(const std::string& text) {
  Reader reader(text);
  ParseOutcome out;
  Scenario s;

  if (auto v = reader.str("problem", "kind")) s.problem_kind = *v;
  if (auto v = reader.str("problem", "parameterization")) s.parameterization = *v;
  if (s.problem_kind != "gradient" && s.problem_kind != "monotone")
    reader.diag(reader.line_of("problem", "kind"), "problem kind must be \"gradient\" or \"monotone\"");
  if (s.parameterization != "beta" && s.parameterization != "epsilon" && s.parameterization != "epsilon_dictionary")
    reader.diag(reader.line_of("problem", "parameterization"),
                "parameterization must be \"beta\", \"epsilon\" or \"epsilon_dictionary\"");

  if (s.problem_kind == "gradient") {
    if (!reader.has_section("phi"))
      reader.diag(0, "gradient problems need a [phi] section");
    else
      s.phi = read_function(reader, "phi", reader.diagnostics);
  } else if (reader.has_section("operator")) {
    OperatorSpec op;
    if (auto v = reader.str("operator", "kind")) op.kind = *v;
    if (op.kind == "affine") {
      if (auto m = reader.matrix("operator", "m"))
        op.m = *m;
      else
        reader.diag(reader.section_line("operator"), "[operator] kind affine needs matrix key m");
      if (auto q = reader.array("operator", "q"))
        op.q = *q;
      else
        reader.diag(reader.section_line("operator"), "[operator] kind affine needs key q");
    } else if (op.kind == "rotation2d") {
      if (auto v = reader.number("operator", "angle"))
        op.angle = *v;
      else
        reader.diag(reader.section_line("operator"), "[operator] kind rotation2d needs key angle");
    } else {
      reader.diag(reader.line_of("operator", "kind"), "unknown operator kind: " + op.kind);
    }
    s.op = std::move(op);
  } else {
    reader.diag(0, "monotone problems need an [operator] section");
  }

  if (!reader.has_section("psi"))
    reader.diag(0, "scenario needs a [psi] section");
  else
    s.psi = read_function(reader, "psi", reader.diagnostics);

  if (auto v = reader.str("schedule", "kind")) s.schedule.kind = *v;
  if (auto v = reader.number("schedule", "a")) s.schedule.a = *v;
  if (s.schedule.kind == "power") {
    if (auto v = reader.number("schedule", "p")) s.schedule.exponent = *v;
  } else if (s.schedule.kind == "exp") {
    if (auto v = reader.number("schedule", "r")) s.schedule.exponent = *v;
  } else if (s.schedule.kind != "constant" && s.schedule.kind != "log") {
    reader.diag(reader.line_of("schedule", "kind"), "unknown schedule kind: " + s.schedule.kind);
  }

  if (auto v = reader.number("integrator", "h")) s.h = *v;
  if (s.h <= 0.0) reader.diag(reader.line_of("integrator", "h"), "key h: step must be positive");
  if (auto v = reader.number("integrator", "t_end")) s.t_end = *v;
  if (s.t_end <= 0.0) reader.diag(reader.line_of("integrator", "t_end"), "key t_end: horizon must be positive");
  if (auto v = reader.number("integrator", "refinements")) {
    s.refinements = static_cast<int>(*v);
    if (s.refinements < 0 || static_cast<double>(s.refinements) != *v)
      reader.diag(reader.line_of("integrator", "refinements"), "key refinements: must be a nonnegative integer");
  }
  if (auto v = reader.array("integrator", "x0")) s.x0 = *v;

  if (reader.has_section("probes")) {
    const auto count = reader.number("probes", "count");
    const int m = count ? static_cast<int>(*count) : 0;
    for (int i = 0; i < m; ++i) {
      const std::string key = "probe_" + std::to_string(i);
      if (auto v = reader.array("probes", key))
        s.probes.push_back(*v);
      else
        reader.diag(reader.section_line("probes"), "[probes] missing key " + key);
    }
  }

  if (reader.has_section("oracle")) {
    if (auto v = reader.str("oracle", "kind")) s.oracle_kind = *v;
    if (s.oracle_kind == "point") {
      if (auto v = reader.array("oracle", "point"))
        s.oracle_point = *v;
      else
        reader.diag(reader.section_line("oracle"), "[oracle] kind point needs key point");
    } else if (s.oracle_kind != "none" && s.oracle_kind != "kkt") {
      reader.diag(reader.line_of("oracle", "kind"), "oracle kind must be \"none\", \"kkt\" or \"point\"");
    }
  }

  if (reader.has_section("tags")) {
    const auto count = reader.number("tags", "count");
    const int m = count ? static_cast<int>(*count) : 0;
    for (int i = 0; i < m; ++i) {
      const std::string key = "tag_" + std::to_string(i);
      if (auto v = reader.str("tags", key)) {
        if (!parse_theorem_tag(*v))
          reader.diag(reader.line_of("tags", key), "key " + key + ": unknown theorem tag: " + *v);
        else
          s.tags.push_back(*v);
      } else {
        reader.diag(reader.section_line("tags"), "[tags] missing key " + key);
      }
    }
  }

  if (auto v = reader.str("output", "csv")) s.csv_path = *v;
  if (auto v = reader.str("output", "report")) s.report_path = *v;

  reader.flag_unknown(
      {"problem", "phi", "psi", "operator", "schedule", "integrator", "probes", "oracle", "tags", "output"});

  out.diagnostics = std::move(reader.diagnostics);
  if (!out.diagnostics.empty()) return out;

  // semantic validation: build everything once, mapping failures to diagnostics
  try {
    const Problem p = s.build_problem();
    if (s.x0.size() == 0) s.x0 = Vec::Zero(p.dim());
    if (s.x0.size() != p.dim()) {
      out.diagnostics.push_back({0, "x0 dimension does not match the problem dimension"});
      return out;
    }
    for (const Vec& z : s.probes) {
      if (z.size() != p.dim()) {
        out.diagnostics.push_back({0, "probe dimension does not match the problem dimension"});
        return out;
      }
      if (p.psi().has_argmin_set() && !p.psi().argmin_set()->contains(z, 1e-8)) {
        out.diagnostics.push_back({0, "probe point is not in the argmin set of psi"});
        return out;
      }
    }
    if (s.oracle_kind == "point" && s.oracle_point.size() != p.dim()) {
      out.diagnostics.push_back({0, "oracle point dimension does not match the problem dimension"});
      return out;
    }
  } catch (const InvalidInput& e) {
    out.diagnostics.push_back({0, e.what()});
    return out;
  }

  out.scenario = std::move(s);
  return out;
}

// ---------------------------------------------------------------------------
// canonical serialization

namespace {

std::string vec_str(const Vec& v) {
  std::string s = "[";
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) s += ", ";
    s += format_double(v[i]);
  }
  return s + "]";
}

std::string mat_str(const Mat& m) {
  std::string s = "[";
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (i || j) s += ", ";
      s += format_double(m(i, j));
    }
  return s + "]";
}

void emit_function(std::string& out, const std::string& name, const FunctionSpec& f) {
  out += "[" + name + "]\n";
  out += "kind = \"" + f.kind + "\"\n";
  if (f.kind == "zero" || f.kind == "abs") {
    out += "dim = " + std::to_string(f.dim) + "\n";
  } else if (f.kind == "quadratic") {
    out += "q = " + mat_str(f.a) + "\n";
    out += "q_rows = " + std::to_string(f.a.rows()) + "\n";
    out += "c = " + vec_str(f.b) + "\n";
    out += "r = " + format_double(f.r) + "\n";
  } else if (f.kind == "indicator_affine" || f.kind == "sqdist_affine" || f.kind == "least_squares") {
    out += "a = " + mat_str(f.a) + "\n";
    out += "a_rows = " + std::to_string(f.a.rows()) + "\n";
    out += "b = " + vec_str(f.b) + "\n";
  } else if (f.kind == "indicator_box" || f.kind == "sqdist_box") {
    out += "lo = " + vec_str(f.lo) + "\n";
    out += "hi = " + vec_str(f.hi) + "\n";
  } else if (f.kind == "support_ball") {
    out += "dim = " + std::to_string(f.dim) + "\n";
    out += "radius = " + format_double(f.radius) + "\n";
  }
  out += "\n";
}

}  // namespace

std::string serialize_scenario(const Scenario& s) {
  std::string out;
  out += "[problem]\n";
  out += "kind = \"" + s.problem_kind + "\"\n";
  out += "parameterization = \"" + s.parameterization + "\"\n\n";

  if (s.problem_kind == "gradient" && s.phi) emit_function(out, "phi", *s.phi);
  if (s.problem_kind == "monotone" && s.op) {
    out += "[operator]\n";
    out += "kind = \"" + s.op->kind + "\"\n";
    if (s.op->kind == "affine") {
      out += "m = " + mat_str(s.op->m) + "\n";
      out += "m_rows = " + std::to_string(s.op->m.rows()) + "\n";
      out += "q = " + vec_str(s.op->q) + "\n";
    } else {
      out += "angle = " + format_double(s.op->angle) + "\n";
    }
    out += "\n";
  }
  emit_function(out, "psi", s.psi);

  out += "[schedule]\n";
  out += "kind = \"" + s.schedule.kind + "\"\n";
  out += "a = " + format_double(s.schedule.a) + "\n";
  if (s.schedule.kind == "power") out += "p = " + format_double(s.schedule.exponent) + "\n";
  if (s.schedule.kind == "exp") out += "r = " + format_double(s.schedule.exponent) + "\n";
  out += "\n";

  out += "[integrator]\n";
  out += "h = " + format_double(s.h) + "\n";
  out += "t_end = " + format_double(s.t_end) + "\n";
  out += "refinements = " + std::to_string(s.refinements) + "\n";
  out += "x0 = " + vec_str(s.x0) + "\n\n";

  if (!s.probes.empty()) {
    out += "[probes]\n";
    out += "count = " + std::to_string(s.probes.size()) + "\n";
    for (size_t i = 0; i < s.probes.size(); ++i)
      out += "probe_" + std::to_string(i) + " = " + vec_str(s.probes[i]) + "\n";
    out += "\n";
  }

  if (s.oracle_kind != "none") {
    out += "[oracle]\n";
    out += "kind = \"" + s.oracle_kind + "\"\n";
    if (s.oracle_kind == "point") out += "point = " + vec_str(s.oracle_point) + "\n";
    out += "\n";
  }

  if (!s.tags.empty()) {
    out += "[tags]\n";
    out += "count = " + std::to_string(s.tags.size()) + "\n";
    for (size_t i = 0; i < s.tags.size(); ++i) out += "tag_" + std::to_string(i) + " = \"" + s.tags[i] + "\"\n";
    out += "\n";
  }

  out += "[output]\n";
  out += "csv = \"" + s.csv_path + "\"\n";
  out += "report = \"" + s.report_path + "\"\n";
  return out;
}

}  // namespace mscale
