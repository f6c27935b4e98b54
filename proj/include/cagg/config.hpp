#pragma once

// Run configuration: INI/TOML-style `key = value` under [run], [grid], [shape]
// and [solver]. Values may be quoted; lists are written [a, b, c]. Comments
// start with '#' or ';'.

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <boost/uuid/detail/sha1.hpp>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cagg/error.hpp"
#include "cagg/field_io.hpp"
#include "cagg/grid.hpp"
#include "cagg/levelset.hpp"
#include "cagg/shapes.hpp"

namespace cagg {

enum class Study { pme, jko, heleshaw, msweep, longtime, diag };

inline const char* to_string(Study s) {
  switch (s) {
    case Study::pme: return "pme";
    case Study::jko: return "jko";
    case Study::heleshaw: return "heleshaw";
    case Study::msweep: return "msweep";
    case Study::longtime: return "longtime";
    case Study::diag: return "diag";
  }
  return "?";
}

inline std::optional<Study> parse_study(const std::string& s) {
  for (Study k : {Study::pme, Study::jko, Study::heleshaw, Study::msweep, Study::longtime, Study::diag})
    if (s == to_string(k)) return k;
  return std::nullopt;
}

struct RunConfig {
  std::string text;  // the file as read
  std::string out_dir = "out";
  std::uint64_t seed = 0;

  double lo = -2.5, hi = 2.5, h = 1.0 / 32.0;
  GridSpec grid;

  std::string shape_kind = "disk";
  Shape shape = Disk{};
  std::string level_set_path;

  double m = 2.0;
  double tau = 0.05;
  double eps = 0.5;  // entropic regularisation in units of h^2
  double t_end = 1.0;
  int dump_every = 0;  // steps between field dumps, 0 = final state only
  double snapshot_dt = 0.0;
  std::vector<double> m_list{8, 16, 32, 64};
  std::string drift = "self_consistent";  // pme: self_consistent | zero;  jko: constrained | frozen | power
  std::string initial = "lemma";          // pme initial data: lemma | consistent | patch
};

namespace detail {

/// Git blob id: SHA-1 of "blob <size>\0" followed by the content.
inline std::string git_blob_sha1(const std::string& content) {
  boost::uuids::detail::sha1 h;
  const std::string head = "blob " + std::to_string(content.size());
  h.process_bytes(head.data(), head.size());
  h.process_byte(0);
  h.process_bytes(content.data(), content.size());
  unsigned int d[5];
  h.get_digest(d);
  char buf[41];
  for (int k = 0; k < 5; ++k) std::snprintf(buf + 8 * k, 9, "%08x", d[k]);
  return buf;
}

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

/// Drops '#' comments (outside quotes) so the INI reader sees plain key = value lines.
inline std::string strip_comments(const std::string& text) {
  std::istringstream is(text);
  std::string out, line;
  while (std::getline(is, line)) {
    bool quoted = false;
    for (std::size_t k = 0; k < line.size(); ++k) {
      if (line[k] == '"') quoted = !quoted;
      if (line[k] == '#' && !quoted) {
        line.erase(k);
        break;
      }
    }
    out += line + '\n';
  }
  return out;
}

/// 1-based line of `key` inside `[section]`, 0 if absent.
inline int locate(const std::string& text, const std::string& section, const std::string& key) {
  std::istringstream is(text);
  std::string line, current;
  int n = 0, section_line = 0;
  while (std::getline(is, line)) {
    ++n;
    const std::string t = trim(line);
    if (t.size() > 1 && t.front() == '[' && t.back() == ']') {
      current = trim(t.substr(1, t.size() - 2));
      if (current == section) section_line = n;
      continue;
    }
    const auto eq = t.find('=');
    if (current == section && eq != std::string::npos && trim(t.substr(0, eq)) == key) return n;
  }
  return key.empty() ? section_line : 0;
}

class Reader {
 public:
  Reader(const boost::property_tree::ptree& pt, const std::string& text) : pt_(pt), text_(text) {}

  [[noreturn]] void fail(const std::string& section, const std::string& key, const std::string& what) const {
    throw config_error(section + "." + key + ": " + what, locate(text_, section, key));
  }

  std::optional<std::string> raw(const std::string& section, const std::string& key) {
    used_[section].insert(key);
    const auto sec = pt_.get_child_optional(section);
    if (!sec) return std::nullopt;
    const auto v = sec->get_optional<std::string>(key);
    if (!v) return std::nullopt;
    std::string s = trim(*v);
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
    return s;
  }

  double number(const std::string& section, const std::string& key, double fallback) {
    const auto s = raw(section, key);
    return s ? parse_number(section, key, *s) : fallback;
  }

  double required_number(const std::string& section, const std::string& key) {
    const auto s = raw(section, key);
    if (!s) throw config_error(section + "." + key + ": required key missing", locate(text_, section, ""));
    return parse_number(section, key, *s);
  }

  std::string string(const std::string& section, const std::string& key, const std::string& fallback) {
    return raw(section, key).value_or(fallback);
  }

  std::vector<double> list(const std::string& section, const std::string& key, std::vector<double> fallback) {
    const auto s = raw(section, key);
    if (!s) return fallback;
    return parse_list(section, key, *s);
  }

  std::vector<double> parse_list(const std::string& section, const std::string& key, std::string s) const {
    s = trim(s);
    if (s.size() >= 2 && s.front() == '[' && s.back() == ']') s = s.substr(1, s.size() - 2);
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_number(section, key, trim(item)));
    if (out.empty()) fail(section, key, "empty list");
    return out;
  }

  Point point(const std::string& section, const std::string& key, Point fallback) {
    const auto s = raw(section, key);
    if (!s) return fallback;
    const auto v = parse_list(section, key, *s);
    if (v.size() != 2) fail(section, key, "expected [x, y]");
    return {v[0], v[1]};
  }

  /// Every key present in the file must have been read.
  void reject_unknown() const {
    for (const auto& [section, tree] : pt_) {
      const auto it = used_.find(section);
      if (it == used_.end())
        throw config_error("unknown section [" + section + "]", locate(text_, section, ""));
      for (const auto& kv : tree)
        if (!it->second.count(kv.first)) fail(section, kv.first, "unknown key");
    }
  }

  double parse_number(const std::string& section, const std::string& key, const std::string& s) const {
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE || !std::isfinite(v))
      fail(section, key, "not a finite number: '" + s + "'");
    return v;
  }

 private:
  const boost::property_tree::ptree& pt_;
  const std::string& text_;
  std::map<std::string, std::set<std::string>> used_;
};

}  // namespace detail

inline std::string config_hash(const RunConfig& cfg) { return detail::git_blob_sha1(cfg.text); }

inline RunConfig parse_config(const std::string& text) {
  boost::property_tree::ptree pt;
  {
    std::istringstream is(detail::strip_comments(text));
    try {
      boost::property_tree::read_ini(is, pt);
    } catch (const boost::property_tree::ini_parser_error& e) {
      throw config_error(e.message(), static_cast<int>(e.line()));
    }
  }
  for (const auto& [section, tree] : pt)
    if (tree.empty() && !tree.data().empty())
      throw config_error("key '" + section + "' outside any section", detail::locate(text, "", section));

  RunConfig c;
  c.text = text;
  detail::Reader r(pt, text);

  c.out_dir = r.string("run", "out_dir", c.out_dir);
  if (c.out_dir.empty()) r.fail("run", "out_dir", "must not be empty");
  {
    const double s = r.number("run", "seed", 0.0);
    if (s < 0 || s != std::floor(s) || s > 9.007199254740992e15) r.fail("run", "seed", "must be a nonnegative integer");
    c.seed = static_cast<std::uint64_t>(s);
  }

  c.lo = r.number("grid", "lo", c.lo);
  c.hi = r.number("grid", "hi", c.hi);
  c.h = r.number("grid", "h", c.h);
  if (!(c.h > 0.0)) r.fail("grid", "h", "must be positive");
  if (!(c.hi > c.lo)) r.fail("grid", "hi", "must exceed lo");
  if ((c.hi - c.lo) / c.h > 4096.0) r.fail("grid", "h", "more than 4096 cells per side");
  {
    const double n = (c.hi - c.lo) / c.h;
    if (std::fabs(n - std::round(n)) > 1e-9 * n) r.fail("grid", "h", "(hi - lo) / h must be an integer");
  }
  c.grid = GridSpec::box(c.lo, c.hi, c.h);

  c.shape_kind = r.string("shape", "kind", c.shape_kind);
  const Point origin{0.0, 0.0};
  auto positive = [&](const std::string& key, double v) {
    if (!(v > 0.0)) r.fail("shape", key, "must be positive");
    return v;
  };
  if (c.shape_kind == "disk") {
    c.shape = Disk{r.point("shape", "c", origin), positive("r", r.number("shape", "r", 1.0))};
  } else if (c.shape_kind == "ellipse") {
    c.shape = Ellipse{r.point("shape", "c", origin), positive("a", r.number("shape", "a", std::sqrt(2.0))),
                      positive("b", r.number("shape", "b", 1.0 / std::sqrt(2.0)))};
  } else if (c.shape_kind == "square") {
    c.shape = Square{r.point("shape", "c", origin), positive("s", r.number("shape", "s", 1.0))};
  } else if (c.shape_kind == "two_disks") {
    c.shape = TwoDisks{Disk{r.point("shape", "c1", {-0.75, 0.0}), positive("r1", r.number("shape", "r1", 0.7))},
                       Disk{r.point("shape", "c2", {0.75, 0.0}), positive("r2", r.number("shape", "r2", 0.7))}};
  } else if (c.shape_kind == "level_set_file") {
    c.level_set_path = r.string("shape", "path", "");
    if (c.level_set_path.empty()) r.fail("shape", "path", "required for level_set_file");
  } else {
    r.fail("shape", "kind", "expected disk, ellipse, square, two_disks or level_set_file, got '" + c.shape_kind + "'");
  }

  c.m = r.number("solver", "m", c.m);
  if (!(c.m > 1.0)) r.fail("solver", "m", "must exceed 1");
  c.tau = r.number("solver", "tau", c.tau);
  if (!(c.tau > 0.0)) r.fail("solver", "tau", "must be positive");
  c.eps = r.number("solver", "eps", c.eps);
  if (!(c.eps > 0.0)) r.fail("solver", "eps", "must be positive");
  c.t_end = r.number("solver", "t_end", c.t_end);
  if (!(c.t_end > 0.0)) r.fail("solver", "t_end", "must be positive");
  {
    const double d = r.number("solver", "dump_every", 0.0);
    if (d < 0 || d != std::floor(d) || d > 1e9) r.fail("solver", "dump_every", "must be a nonnegative integer");
    c.dump_every = static_cast<int>(d);
  }
  c.snapshot_dt = r.number("solver", "snapshot_dt", c.snapshot_dt);
  if (c.snapshot_dt < 0.0) r.fail("solver", "snapshot_dt", "must be nonnegative");
  c.m_list = r.list("solver", "m_list", c.m_list);
  for (double m : c.m_list)
    if (!(m > 1.0)) r.fail("solver", "m_list", "every m must exceed 1");
  c.drift = r.string("solver", "drift", c.drift);
  c.initial = r.string("solver", "initial", c.initial);
  if (c.initial != "lemma" && c.initial != "consistent" && c.initial != "patch")
    r.fail("solver", "initial", "expected lemma, consistent or patch");
  const std::set<std::string> drifts{"self_consistent", "zero", "constrained", "frozen", "power"};
  if (!drifts.count(c.drift)) r.fail("solver", "drift", "unknown drift '" + c.drift + "'");

  r.reject_unknown();
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw config_error("cannot read config file " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

/// The initial patch as a level set on the configured grid.
inline LevelSet initial_level_set(const RunConfig& c) {
  if (c.shape_kind != "level_set_file") return make_level_set(c.grid, c.shape);
  const auto f = [&] {
    std::ifstream is(c.level_set_path, std::ios::binary);
    if (!is) throw config_error("shape.path: cannot open " + c.level_set_path, detail::locate(c.text, "shape", "path"));
    return read_field(is);
  }();
  const auto& g = f.grid();
  if (g.nx != c.grid.nx || g.ny != c.grid.ny || std::fabs(g.h - c.grid.h) > 1e-12 * c.grid.h ||
      std::fabs(g.ox - c.grid.ox) > 1e-9 || std::fabs(g.oy - c.grid.oy) > 1e-9)
    throw config_error("shape.path: level set grid does not match [grid]", detail::locate(c.text, "shape", "path"));
  LevelSet ls{g, f.data()};
  reinitialize(ls);
  return ls;
}

}  // namespace cagg
