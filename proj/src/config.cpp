#include "pendular/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace pendular::config {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

// Drops a trailing comment that is not inside a string.
std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '\\' && quoted) {
      ++i;
    } else if (line[i] == '"') {
      quoted = !quoted;
    } else if (line[i] == '#' && !quoted) {
      return line.substr(0, i);
    }
  }
  return line;
}

bool parse_number(const std::string& s, double& out) {
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

std::string parse_string(const std::string& s, int line, const std::string& key) {
  if (s.size() < 2 || s.front() != '"' || s.back() != '"')
    throw ConfigError("unterminated string", line, key);
  std::string out;
  for (std::size_t i = 1; i + 1 < s.size(); ++i) {
    if (s[i] == '\\') {
      if (i + 2 >= s.size()) throw ConfigError("bad escape", line, key);
      const char c = s[++i];
      if (c == 'n') out += '\n';
      else if (c == 't') out += '\t';
      else if (c == '"' || c == '\\') out += c;
      else throw ConfigError("bad escape", line, key);
    } else if (s[i] == '"') {
      throw ConfigError("unexpected quote", line, key);
    } else {
      out += s[i];
    }
  }
  return out;
}

std::vector<std::string> split_array(const std::string& body, int line, const std::string& key) {
  std::vector<std::string> items;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < body.size(); ++i) {
    const char c = body[i];
    if (c == '\\' && quoted && i + 1 < body.size()) {
      cur += c;
      cur += body[++i];
      continue;
    }
    if (c == '"') quoted = !quoted;
    if (c == ',' && !quoted) {
      items.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (quoted) throw ConfigError("unterminated string in array", line, key);
  const std::string last = trim(cur);
  if (!last.empty()) items.push_back(last);
  for (const auto& it : items)
    if (it.empty()) throw ConfigError("empty array element", line, key);
  return items;
}

Value parse_value(const std::string& raw, int line, const std::string& key) {
  if (raw.empty()) throw ConfigError("missing value", line, key);
  if (raw == "true") return true;
  if (raw == "false") return false;
  if (raw.front() == '"') return parse_string(raw, line, key);
  if (raw.front() == '[') {
    if (raw.back() != ']') throw ConfigError("unterminated array", line, key);
    const auto items = split_array(raw.substr(1, raw.size() - 2), line, key);
    if (!items.empty() && items.front().front() == '"') {
      std::vector<std::string> out;
      for (const auto& it : items) out.push_back(parse_string(it, line, key));
      return out;
    }
    std::vector<double> out;
    for (const auto& it : items) {
      double v = 0.0;
      if (!parse_number(it, v)) throw ConfigError("array element is not a number", line, key);
      out.push_back(v);
    }
    return out;
  }
  double v = 0.0;
  if (!parse_number(raw, v)) throw ConfigError("value is not a number, bool, string or array", line, key);
  return v;
}

std::string format_number(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    if (c == '\t') {
      out += "\\t";
      continue;
    }
    out += c;
  }
  return out + "\"";
}

// Typed access with the offending line and field in every error.
class Reader {
 public:
  explicit Reader(const Document& doc) : doc_(doc) {
    static const std::map<std::string, std::vector<std::string>> known = {
        {"", {"seed", "output_dir"}},
        {"robot", {"name", "stance", "mass", "lx", "ly", "height", "mu", "gravity"}},
        {"weights", {"alpha", "beta", "gamma", "lambda", "alpha_grid"}},
        {"scenario",
         {"name", "duration", "sample_rate", "sway_axis", "sway_amplitude", "sway_frequency",
          "horizon", "knots", "offset"}},
        {"solver", {"cone_model", "tol", "max_iter", "ocp_tol", "bc_tol"}},
    };
    for (const auto& [section, entries] : doc) {
      const auto it = known.find(section);
      if (it == known.end()) {
        const int line = entries.empty() ? 0 : entries.begin()->second.line;  // header sorts first
        throw ConfigError("unknown section [" + section + "]", line, section);
      }
      for (const auto& [key, entry] : entries)
        if (!key.empty() && std::find(it->second.begin(), it->second.end(), key) == it->second.end())
          throw ConfigError("unknown key", entry.line, field(section, key));
    }
  }

  static std::string field(const std::string& section, const std::string& key) {
    return section.empty() ? key : section + "." + key;
  }

  const Entry* find(const std::string& section, const std::string& key) const {
    const auto s = doc_.find(section);
    if (s == doc_.end()) return nullptr;
    const auto k = s->second.find(key);
    return k == s->second.end() ? nullptr : &k->second;
  }

  template <typename T>
  void get(const std::string& section, const std::string& key, T& out) const {
    const Entry* e = find(section, key);
    if (!e) return;
    if constexpr (std::is_same_v<T, int> || std::is_same_v<T, std::uint64_t>) {
      const double* v = std::get_if<double>(&e->value);
      if (!v || *v != std::floor(*v) || *v < 0 || *v > 9.007199254740992e15)
        throw ConfigError("expected a non-negative integer", e->line, field(section, key));
      out = static_cast<T>(*v);
    } else {
      const T* v = std::get_if<T>(&e->value);
      if (!v) throw ConfigError("wrong value type", e->line, field(section, key));
      out = *v;
    }
  }

  int line(const std::string& section, const std::string& key) const {
    const Entry* e = find(section, key);
    return e ? e->line : 0;
  }

 private:
  const Document& doc_;
};

}  // namespace

Document parse_document(const std::string& text) {
  Document doc;
  std::string section;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("malformed section header", line_no);
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) throw ConfigError("empty section name", line_no);
      auto& entries = doc[section];
      if (entries.count("")) throw ConfigError("duplicate section [" + section + "]", line_no, section);
      entries[""] = Entry{true, line_no};
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("expected key = value", line_no);
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("missing key", line_no);
    auto& entries = doc[section];
    if (entries.count(key)) throw ConfigError("duplicate key", line_no, Reader::field(section, key));
    entries[key] = Entry{parse_value(trim(line.substr(eq + 1)), line_no, Reader::field(section, key)),
                         line_no};
  }
  return doc;
}

RunConfig from_document(const Document& doc) {
  const Reader r(doc);
  RunConfig c;
  r.get("", "seed", c.seed);
  r.get("", "output_dir", c.output_dir);
  r.get("robot", "name", c.robot.name);
  r.get("robot", "stance", c.robot.stance);
  r.get("robot", "mass", c.robot.mass);
  r.get("robot", "lx", c.robot.lx);
  r.get("robot", "ly", c.robot.ly);
  r.get("robot", "height", c.robot.height);
  r.get("robot", "mu", c.robot.mu);
  r.get("robot", "gravity", c.robot.gravity);
  r.get("weights", "alpha", c.weights.alpha);
  r.get("weights", "beta", c.weights.beta);
  r.get("weights", "gamma", c.weights.gamma);
  r.get("weights", "lambda", c.weights.lambda);
  r.get("weights", "alpha_grid", c.weights.alpha_grid);
  r.get("scenario", "name", c.scenario.name);
  r.get("scenario", "duration", c.scenario.duration);
  r.get("scenario", "sample_rate", c.scenario.sample_rate);
  r.get("scenario", "horizon", c.scenario.horizon);
  r.get("scenario", "knots", c.scenario.knots);

  std::vector<double> offset{0.0, 0.0, 0.0};
  r.get("scenario", "offset", offset);
  if (offset.size() != 3)
    throw ConfigError("offset needs three components", r.line("scenario", "offset"),
                      "scenario.offset");
  c.scenario.offset = Vec3(offset[0], offset[1], offset[2]);

  std::vector<std::string> axes;
  std::vector<double> amps, freqs;
  r.get("scenario", "sway_axis", axes);
  r.get("scenario", "sway_amplitude", amps);
  r.get("scenario", "sway_frequency", freqs);
  if (axes.size() != amps.size() || axes.size() != freqs.size())
    throw ConfigError("sway_axis, sway_amplitude and sway_frequency must have equal length",
                      r.line("scenario", "sway_axis"), "scenario.sway_axis");
  for (std::size_t i = 0; i < axes.size(); ++i) {
    if (axes[i] != "x" && axes[i] != "y" && axes[i] != "z")
      throw ConfigError("sway axis must be x, y or z", r.line("scenario", "sway_axis"),
                        "scenario.sway_axis");
    c.scenario.sway.push_back({axes[i][0], amps[i], freqs[i]});
  }

  r.get("solver", "cone_model", c.solver.cone_model);
  r.get("solver", "tol", c.solver.tol);
  r.get("solver", "max_iter", c.solver.max_iter);
  r.get("solver", "ocp_tol", c.solver.ocp_tol);
  r.get("solver", "bc_tol", c.solver.bc_tol);

  try {
    c.validate();
  } catch (const ConfigError& e) {
    const auto dot = e.field().find('.');
    const int line = dot == std::string::npos ? r.line("", e.field())
                                              : r.line(e.field().substr(0, dot), e.field().substr(dot + 1));
    throw ConfigError(e.what(), line, e.field());
  }
  return c;
}

void RunConfig::validate() const {
  auto positive = [](double v, const char* field) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError("must be positive", 0, field);
  };
  positive(robot.mass, "robot.mass");
  positive(robot.lx, "robot.lx");
  positive(robot.ly, "robot.ly");
  positive(robot.height, "robot.height");
  positive(robot.mu, "robot.mu");
  positive(robot.gravity, "robot.gravity");
  if (robot.stance != "rectangle" && robot.stance != "trot")
    throw ConfigError("stance must be rectangle or trot", 0, "robot.stance");
  if (!(weights.alpha >= 0.0)) throw ConfigError("must be non-negative", 0, "weights.alpha");
  if (!(weights.beta >= 0.0)) throw ConfigError("must be non-negative", 0, "weights.beta");
  if (!(weights.lambda >= 0.0)) throw ConfigError("must be non-negative", 0, "weights.lambda");
  positive(weights.gamma, "weights.gamma");
  for (double a : weights.alpha_grid)
    if (!(a > 0.0)) throw ConfigError("grid values must be positive", 0, "weights.alpha_grid");
  positive(scenario.duration, "scenario.duration");
  positive(scenario.sample_rate, "scenario.sample_rate");
  positive(scenario.horizon, "scenario.horizon");
  if (scenario.knots < 2) throw ConfigError("need at least two knots", 0, "scenario.knots");
  for (const auto& s : scenario.sway) {
    if (!(s.amplitude >= 0.0)) throw ConfigError("amplitudes must be >= 0", 0, "scenario.sway_amplitude");
    if (!(s.frequency > 0.0)) throw ConfigError("frequencies must be > 0", 0, "scenario.sway_frequency");
  }
  if (!scenario.offset.allFinite()) throw ConfigError("must be finite", 0, "scenario.offset");
  if (solver.cone_model != "soc" && solver.cone_model != "pyramid8" && solver.cone_model != "none")
    throw ConfigError("cone_model must be soc, pyramid8 or none", 0, "solver.cone_model");
  positive(solver.tol, "solver.tol");
  positive(solver.ocp_tol, "solver.ocp_tol");
  positive(solver.bc_tol, "solver.bc_tol");
  if (solver.max_iter < 1) throw ConfigError("must be positive", 0, "solver.max_iter");
  if (output_dir.empty()) throw ConfigError("must not be empty", 0, "output_dir");
}

StanceConfig RunConfig::stance() const {
  if (robot.stance == "trot")
    return trot_stance(robot.lx, robot.ly, robot.mu, robot.mass, robot.gravity);
  return rectangle_stance(robot.lx, robot.ly, robot.mu, robot.mass, robot.gravity);
}

Vec3 RunConfig::nominal_com() const { return {0.0, 0.0, robot.height}; }

RunConfig parse_run_config(const std::string& text) { return from_document(parse_document(text)); }

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

std::string to_toml(const RunConfig& c) {
  std::ostringstream o;
  auto num_array = [](const std::vector<double>& v) {
    std::string s = "[";
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + format_number(v[i]);
    return s + "]";
  };
  o << "seed = " << c.seed << "\n";
  o << "output_dir = " << quote(c.output_dir) << "\n\n";
  o << "[robot]\n";
  o << "name = " << quote(c.robot.name) << "\n";
  o << "stance = " << quote(c.robot.stance) << "\n";
  o << "mass = " << format_number(c.robot.mass) << "\n";
  o << "lx = " << format_number(c.robot.lx) << "\n";
  o << "ly = " << format_number(c.robot.ly) << "\n";
  o << "height = " << format_number(c.robot.height) << "\n";
  o << "mu = " << format_number(c.robot.mu) << "\n";
  o << "gravity = " << format_number(c.robot.gravity) << "\n\n";
  o << "[weights]\n";
  o << "alpha = " << format_number(c.weights.alpha) << "\n";
  o << "beta = " << format_number(c.weights.beta) << "\n";
  o << "gamma = " << format_number(c.weights.gamma) << "\n";
  o << "lambda = " << format_number(c.weights.lambda) << "\n";
  o << "alpha_grid = " << num_array(c.weights.alpha_grid) << "\n\n";
  o << "[scenario]\n";
  o << "name = " << quote(c.scenario.name) << "\n";
  o << "duration = " << format_number(c.scenario.duration) << "\n";
  o << "sample_rate = " << format_number(c.scenario.sample_rate) << "\n";
  std::string axes = "[";
  std::vector<double> amps, freqs;
  for (std::size_t i = 0; i < c.scenario.sway.size(); ++i) {
    axes += (i ? ", " : "") + quote(std::string(1, c.scenario.sway[i].axis));
    amps.push_back(c.scenario.sway[i].amplitude);
    freqs.push_back(c.scenario.sway[i].frequency);
  }
  o << "sway_axis = " << axes << "]\n";
  o << "sway_amplitude = " << num_array(amps) << "\n";
  o << "sway_frequency = " << num_array(freqs) << "\n";
  o << "horizon = " << format_number(c.scenario.horizon) << "\n";
  o << "knots = " << c.scenario.knots << "\n";
  o << "offset = "
    << num_array({c.scenario.offset.x(), c.scenario.offset.y(), c.scenario.offset.z()}) << "\n\n";
  o << "[solver]\n";
  o << "cone_model = " << quote(c.solver.cone_model) << "\n";
  o << "tol = " << format_number(c.solver.tol) << "\n";
  o << "max_iter = " << c.solver.max_iter << "\n";
  o << "ocp_tol = " << format_number(c.solver.ocp_tol) << "\n";
  o << "bc_tol = " << format_number(c.solver.bc_tol) << "\n";
  return o.str();
}

}  // namespace pendular::config
