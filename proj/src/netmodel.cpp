#include "opfcert/netmodel.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "opfcert/graph.hpp"

namespace opfcert::netmodel {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::string trim(std::string_view s) {
  size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return std::string(s.substr(a, b - a));
}

bool parse_number(const std::string& tok, double& out) {
  const char* p = tok.c_str();
  char* end = nullptr;
  out = std::strtod(p, &end);
  return end == p + tok.size() && end != p;
}

}  // namespace

double CostCurve::eval(double p) const {
  if (kind == Kind::polynomial) {
    double v = 0.0, pk = 1.0;
    for (double c : poly) {
      v += c * pk;
      pk *= p;
    }
    return v;
  }
  // Piecewise-linear: convexity makes the curve the max of its segment lines.
  const size_t m = pwl_x.size();
  if (m == 1) return pwl_y[0];
  double best = -std::numeric_limits<double>::infinity();
  for (size_t k = 0; k + 1 < m; ++k) {
    const double slope = (pwl_y[k + 1] - pwl_y[k]) / (pwl_x[k + 1] - pwl_x[k]);
    best = std::max(best, pwl_y[k] + slope * (p - pwl_x[k]));
  }
  return best;
}

int NetworkCase::index_of(int external_id) const {
  auto it = index_of_id.find(external_id);
  if (it == index_of_id.end())
    throw ValidationError("unknown bus id " + std::to_string(external_id));
  return it->second;
}

std::pair<int, int> NetworkCase::branch_endpoints(int k) const {
  const Branch& br = branches.at(static_cast<size_t>(k));
  return {index_of(br.from), index_of(br.to)};
}

BranchAdmittance branch_admittance(const Branch& br) {
  const std::complex<double> ys = 1.0 / std::complex<double>(br.r, br.x);
  const std::complex<double> ysh(0.0, br.b_charge / 2.0);
  const std::complex<double> tap = std::polar(br.tap, br.shift);
  BranchAdmittance y;
  y.yff = (ys + ysh) / (br.tap * br.tap);
  y.yft = -ys / std::conj(tap);
  y.ytf = -ys / tap;
  y.ytt = ys + ysh;
  return y;
}

namespace detail {

RawCase read_matpower_tables(std::istream& in) {
  RawCase raw;
  std::string line;
  int lineno = 0;
  std::string current;          // matrix being filled, empty when outside
  bool skipping_cell = false;   // inside a { ... } block we ignore
  std::vector<double> row;
  int row_start_line = 0;

  auto close_row = [&]() {
    if (row.empty()) return;
    raw.matrices[current].push_back(row);
    raw.row_lines[current].push_back(row_start_line);
    row.clear();
  };

  while (std::getline(in, line)) {
    ++lineno;
    if (auto pc = line.find('%'); pc != std::string::npos) line.erase(pc);
    std::string text = trim(line);
    if (text.empty()) continue;

    if (skipping_cell) {
      if (text.find("};") != std::string::npos) skipping_cell = false;
      continue;
    }

    if (current.empty()) {
      if (text.rfind("function", 0) == 0) {
        auto eq = text.find('=');
        if (eq != std::string::npos) raw.name = trim(text.substr(eq + 1));
        continue;
      }
      auto eq = text.find('=');
      if (eq == std::string::npos) continue;
      std::string lhs = trim(text.substr(0, eq));
      auto dot = lhs.rfind('.');
      if (dot == std::string::npos) continue;
      std::string field = lhs.substr(dot + 1);
      std::string rhs = trim(text.substr(eq + 1));
      if (field == "version") continue;
      if (!rhs.empty() && rhs[0] == '{') {
        if (rhs.find("};") == std::string::npos) skipping_cell = true;
        continue;
      }
      if (!rhs.empty() && rhs[0] == '[') {
        current = field;
        raw.matrices[current];  // an empty matrix still counts as present
        raw.row_lines[current];
        row_start_line = lineno;
        text = trim(rhs.substr(1));
        if (text.empty()) continue;
        // fall through to matrix content handling below
      } else {
        if (field == "baseMVA") {
          std::string num = rhs;
          if (!num.empty() && num.back() == ';') num.pop_back();
          double v = 0.0;
          if (!parse_number(trim(num), v))
            throw ParseError(lineno, "cannot parse baseMVA value '" + rhs + "'");
          raw.base_mva = v;
          raw.has_base_mva = true;
        }
        continue;
      }
    }

    // Inside a matrix: split into tokens, honoring ';' row breaks and the
    // closing ']'. A '...' continuation keeps the row open past the newline.
    bool continuation = false;
    if (auto dots = text.find("..."); dots != std::string::npos) {
      continuation = true;
      text.erase(dots);
    }
    std::string tok;
    bool closed = false;
    auto flush_tok = [&]() {
      if (tok.empty()) return;
      double v = 0.0;
      if (!parse_number(tok, v))
        throw ParseError(lineno, "bad token '" + tok + "' in mpc." + current);
      if (row.empty()) row_start_line = lineno;
      row.push_back(v);
      tok.clear();
    };
    for (char ch : text) {
      if (closed) break;
      switch (ch) {
        case ';':
          flush_tok();
          close_row();
          break;
        case ']':
          flush_tok();
          close_row();
          current.clear();
          closed = true;
          break;
        case ',':
        case ' ':
        case '\t':
          flush_tok();
          break;
        default:
          tok += ch;
      }
    }
    if (!closed) {
      flush_tok();
      if (!continuation) close_row();
    }
  }
  if (!current.empty())
    throw ParseError(lineno, "unterminated matrix mpc." + current);
  return raw;
}

}  // namespace detail

namespace {

void require_columns(const std::string& name,
                     const std::vector<std::vector<double>>& rows,
                     const std::vector<int>& row_lines, size_t need) {
  for (size_t k = 0; k < rows.size(); ++k) {
    if (rows[k].size() < need)
      throw ParseError(row_lines.size() > k ? row_lines[k] : 0,
                       "mpc." + name + " row " + std::to_string(k + 1) + " has " +
                           std::to_string(rows[k].size()) + " columns, expected >= " +
                           std::to_string(need));
  }
}

void validate_case(NetworkCase& c) {
  c.index_of_id.clear();
  c.slack_index = -1;
  int slack_count = 0;
  for (size_t i = 0; i < c.buses.size(); ++i) {
    const Bus& b = c.buses[i];
    if (!c.index_of_id.emplace(b.id, static_cast<int>(i)).second)
      throw ValidationError("duplicate bus id " + std::to_string(b.id));
    if (!(b.vmin > 0.0) || !(b.vmin <= b.vmax))
      throw ValidationError("bus " + std::to_string(b.id) +
                            ": voltage bounds need 0 < vmin <= vmax");
    if (b.is_slack) {
      ++slack_count;
      c.slack_index = static_cast<int>(i);
    }
  }
  if (slack_count != 1)
    throw ValidationError("expected exactly one slack bus, found " +
                          std::to_string(slack_count));
  for (size_t k = 0; k < c.branches.size(); ++k) {
    const Branch& br = c.branches[k];
    auto check_bus = [&](int id) {
      if (!c.index_of_id.count(id))
        throw ValidationError("branch " + std::to_string(k + 1) +
                              " references unknown bus " + std::to_string(id));
    };
    check_bus(br.from);
    check_bus(br.to);
    if (br.from == br.to)
      throw ValidationError("branch " + std::to_string(k + 1) + " is a self-loop");
    if (br.r == 0.0 && br.x == 0.0)
      throw ValidationError("branch " + std::to_string(k + 1) + " has zero impedance");
    if (!(br.tap > 0.0))
      throw ValidationError("branch " + std::to_string(k + 1) + " has nonpositive tap");
  }
  for (size_t g = 0; g < c.generators.size(); ++g) {
    const Generator& gen = c.generators[g];
    if (!c.index_of_id.count(gen.bus))
      throw ValidationError("generator " + std::to_string(g + 1) +
                            " references unknown bus " + std::to_string(gen.bus));
    if (!(gen.pmin <= gen.pmax) || !(gen.qmin <= gen.qmax))
      throw ValidationError("generator " + std::to_string(g + 1) + " has empty bounds");
    const CostCurve& cc = gen.cost;
    if (cc.kind == CostCurve::Kind::polynomial) {
      if (cc.poly.empty() || cc.poly.size() > 3)
        throw ValidationError("generator " + std::to_string(g + 1) +
                              ": polynomial cost must have degree <= 2");
      if (cc.quadratic_coef() < 0.0)
        throw ValidationError("generator " + std::to_string(g + 1) +
                              ": negative quadratic cost coefficient");
    } else {
      if (cc.pwl_x.size() < 2 || cc.pwl_x.size() != cc.pwl_y.size())
        throw ValidationError("generator " + std::to_string(g + 1) +
                              ": piecewise cost needs >= 2 points");
      double prev_slope = -std::numeric_limits<double>::infinity();
      for (size_t k = 0; k + 1 < cc.pwl_x.size(); ++k) {
        if (!(cc.pwl_x[k + 1] > cc.pwl_x[k]))
          throw ValidationError("generator " + std::to_string(g + 1) +
                                ": piecewise breakpoints must increase");
        double slope = (cc.pwl_y[k + 1] - cc.pwl_y[k]) / (cc.pwl_x[k + 1] - cc.pwl_x[k]);
        if (slope < prev_slope - 1e-12)
          throw ValidationError("generator " + std::to_string(g + 1) +
                                ": piecewise cost is not convex");
        prev_slope = slope;
      }
    }
  }
}

CostCurve convert_gencost(const std::vector<double>& row, double base, size_t gen_index) {
  CostCurve cc;
  const int model = static_cast<int>(row[0]);
  const int ncost = static_cast<int>(row[3]);
  if (ncost <= 0 || row.size() < static_cast<size_t>(4 + (model == 1 ? 2 * ncost : ncost)))
    throw ValidationError("gencost row " + std::to_string(gen_index + 1) +
                          " is too short for its point count");
  if (model == 2) {
    if (ncost > 3)
      throw ValidationError("gencost row " + std::to_string(gen_index + 1) +
                            ": polynomial degree > 2 unsupported");
    cc.kind = CostCurve::Kind::polynomial;
    cc.poly.assign(3, 0.0);
    // Entries are highest-degree first in $/MW^k; convert to per-unit power.
    for (int k = 0; k < ncost; ++k) {
      const int degree = ncost - 1 - k;
      cc.poly[degree] = row[4 + k] * std::pow(base, degree);
    }
    while (cc.poly.size() > 1 && cc.poly.back() == 0.0) cc.poly.pop_back();
  } else if (model == 1) {
    cc.kind = CostCurve::Kind::piecewise_linear;
    for (int k = 0; k < ncost; ++k) {
      cc.pwl_x.push_back(row[4 + 2 * k] / base);
      cc.pwl_y.push_back(row[5 + 2 * k]);
    }
  } else {
    throw ValidationError("gencost row " + std::to_string(gen_index + 1) +
                          ": unknown cost model " + std::to_string(model));
  }
  return cc;
}

}  // namespace

NetworkCase parse_matpower(std::istream& in, std::string_view name_hint) {
  detail::RawCase raw = detail::read_matpower_tables(in);
  for (const char* need : {"bus", "branch", "gen", "gencost"}) {
    if (!raw.matrices.count(need))
      throw ParseError(0, std::string("missing required matrix mpc.") + need);
  }
  if (!raw.has_base_mva) throw ParseError(0, "missing mpc.baseMVA");
  if (!(raw.base_mva > 0.0)) throw ParseError(0, "baseMVA must be positive");

  NetworkCase c;
  c.name = raw.name.empty() ? std::string(name_hint) : raw.name;
  c.base_mva = raw.base_mva;
  const double base = raw.base_mva;

  const auto& busm = raw.matrices["bus"];
  require_columns("bus", busm, raw.row_lines["bus"], 13);
  for (const auto& r : busm) {
    Bus b;
    b.id = static_cast<int>(r[0]);
    const int type = static_cast<int>(r[1]);
    if (type == 4)
      throw ValidationError("bus " + std::to_string(b.id) + " is isolated (type 4)");
    b.is_slack = type == 3;
    b.pd = r[2] / base;
    b.qd = r[3] / base;
    b.gs = r[4] / base;
    b.bs = r[5] / base;
    b.vmax = r[11];
    b.vmin = r[12];
    c.buses.push_back(b);
  }

  const auto& genm = raw.matrices["gen"];
  require_columns("gen", genm, raw.row_lines["gen"], 10);
  const auto& costm = raw.matrices["gencost"];
  if (costm.size() == 2 * genm.size())
    throw ValidationError("reactive-power cost rows are unsupported");
  if (costm.size() != genm.size())
    throw ValidationError("mpc.gencost has " + std::to_string(costm.size()) +
                          " rows for " + std::to_string(genm.size()) + " generators");
  require_columns("gencost", costm, raw.row_lines["gencost"], 4);
  for (size_t g = 0; g < genm.size(); ++g) {
    const auto& r = genm[g];
    if (r[7] <= 0.0) continue;  // out of service
    Generator gen;
    gen.bus = static_cast<int>(r[0]);
    gen.qmax = r[3] / base;
    gen.qmin = r[4] / base;
    gen.pmax = r[8] / base;
    gen.pmin = r[9] / base;
    gen.cost = convert_gencost(costm[g], base, g);
    c.generators.push_back(gen);
  }

  const auto& brm = raw.matrices["branch"];
  require_columns("branch", brm, raw.row_lines["branch"], 11);
  for (const auto& r : brm) {
    if (r[10] <= 0.0) continue;  // out of service
    Branch br;
    br.from = static_cast<int>(r[0]);
    br.to = static_cast<int>(r[1]);
    br.r = r[2];
    br.x = r[3];
    br.b_charge = r[4];
    if (r[5] > 0.0) br.smax = r[5] / base;
    br.tap = r[8] > 0.0 ? r[8] : 1.0;
    br.shift = r[9] * kPi / 180.0;
    c.branches.push_back(br);
  }

  validate_case(c);
  return c;
}

NetworkCase parse_matpower_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(0, "cannot open case file " + path);
  std::string hint = path;
  if (auto slash = hint.find_last_of('/'); slash != std::string::npos)
    hint.erase(0, slash + 1);
  if (auto dot = hint.rfind(".m"); dot != std::string::npos && dot == hint.size() - 2)
    hint.erase(dot);
  return parse_matpower(in, hint);
}

bool is_radial(const NetworkCase& c) {
  auto g = graph::PowerGraph::from_case(c);
  graph::spanning_tree(g, c.slack_index);  // throws when disconnected
  return g.edges.size() == static_cast<size_t>(c.n()) - 1;
}

using ojson = nlohmann::ordered_json;

std::string to_canonical_json(const NetworkCase& c) {
  ojson j;
  j["name"] = c.name;
  j["base_mva"] = c.base_mva;
  j["buses"] = ojson::array();
  for (const Bus& b : c.buses) {
    j["buses"].push_back({{"id", b.id},
                          {"vmin", b.vmin},
                          {"vmax", b.vmax},
                          {"pd", b.pd},
                          {"qd", b.qd},
                          {"gs", b.gs},
                          {"bs", b.bs},
                          {"is_slack", b.is_slack}});
  }
  j["branches"] = ojson::array();
  for (const Branch& br : c.branches) {
    ojson e = {{"from", br.from}, {"to", br.to},     {"r", br.r},
               {"x", br.x},       {"b_charge", br.b_charge}, {"tap", br.tap},
               {"shift", br.shift}};
    if (br.smax)
      e["smax"] = *br.smax;
    else
      e["smax"] = nullptr;
    j["branches"].push_back(std::move(e));
  }
  j["generators"] = ojson::array();
  for (const Generator& g : c.generators) {
    ojson cost;
    if (g.cost.kind == CostCurve::Kind::polynomial) {
      cost = {{"kind", "polynomial"}, {"poly", g.cost.poly}};
    } else {
      cost = {{"kind", "piecewise_linear"}, {"x", g.cost.pwl_x}, {"y", g.cost.pwl_y}};
    }
    j["generators"].push_back({{"bus", g.bus},
                               {"pmin", g.pmin},
                               {"pmax", g.pmax},
                               {"qmin", g.qmin},
                               {"qmax", g.qmax},
                               {"cost", std::move(cost)}});
  }
  return j.dump(2);
}

NetworkCase from_canonical_json(const std::string& text) {
  ojson j = ojson::parse(text);
  NetworkCase c;
  c.name = j.at("name").get<std::string>();
  c.base_mva = j.at("base_mva").get<double>();
  for (const auto& e : j.at("buses")) {
    Bus b;
    b.id = e.at("id").get<int>();
    b.vmin = e.at("vmin").get<double>();
    b.vmax = e.at("vmax").get<double>();
    b.pd = e.at("pd").get<double>();
    b.qd = e.at("qd").get<double>();
    b.gs = e.at("gs").get<double>();
    b.bs = e.at("bs").get<double>();
    b.is_slack = e.at("is_slack").get<bool>();
    c.buses.push_back(b);
  }
  for (const auto& e : j.at("branches")) {
    Branch br;
    br.from = e.at("from").get<int>();
    br.to = e.at("to").get<int>();
    br.r = e.at("r").get<double>();
    br.x = e.at("x").get<double>();
    br.b_charge = e.at("b_charge").get<double>();
    br.tap = e.at("tap").get<double>();
    br.shift = e.at("shift").get<double>();
    if (!e.at("smax").is_null()) br.smax = e.at("smax").get<double>();
    c.branches.push_back(br);
  }
  for (const auto& e : j.at("generators")) {
    Generator g;
    g.bus = e.at("bus").get<int>();
    g.pmin = e.at("pmin").get<double>();
    g.pmax = e.at("pmax").get<double>();
    g.qmin = e.at("qmin").get<double>();
    g.qmax = e.at("qmax").get<double>();
    const auto& cost = e.at("cost");
    if (cost.at("kind").get<std::string>() == "polynomial") {
      g.cost.kind = CostCurve::Kind::polynomial;
      g.cost.poly = cost.at("poly").get<std::vector<double>>();
    } else {
      g.cost.kind = CostCurve::Kind::piecewise_linear;
      g.cost.pwl_x = cost.at("x").get<std::vector<double>>();
      g.cost.pwl_y = cost.at("y").get<std::vector<double>>();
    }
    c.generators.push_back(g);
  }
  validate_case(c);
  return c;
}

bool model_equal(const NetworkCase& a, const NetworkCase& b) {
  if (a.name != b.name || a.base_mva != b.base_mva) return false;
  if (a.buses.size() != b.buses.size() || a.branches.size() != b.branches.size() ||
      a.generators.size() != b.generators.size())
    return false;
  for (size_t i = 0; i < a.buses.size(); ++i) {
    const Bus &x = a.buses[i], &y = b.buses[i];
    if (x.id != y.id || x.vmin != y.vmin || x.vmax != y.vmax || x.pd != y.pd ||
        x.qd != y.qd || x.gs != y.gs || x.bs != y.bs || x.is_slack != y.is_slack)
      return false;
  }
  for (size_t i = 0; i < a.branches.size(); ++i) {
    const Branch &x = a.branches[i], &y = b.branches[i];
    if (x.from != y.from || x.to != y.to || x.r != y.r || x.x != y.x ||
        x.b_charge != y.b_charge || x.tap != y.tap || x.shift != y.shift ||
        x.smax != y.smax)
      return false;
  }
  for (size_t i = 0; i < a.generators.size(); ++i) {
    const Generator &x = a.generators[i], &y = b.generators[i];
    if (x.bus != y.bus || x.pmin != y.pmin || x.pmax != y.pmax || x.qmin != y.qmin ||
        x.qmax != y.qmax || x.cost.kind != y.cost.kind || x.cost.poly != y.cost.poly ||
        x.cost.pwl_x != y.cost.pwl_x || x.cost.pwl_y != y.cost.pwl_y)
      return false;
  }
  return true;
}

}  // namespace opfcert::netmodel
