#include "plateid/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "plateid/error.hpp"

namespace plateid {

std::string format_double(double x) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

namespace {

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  return out;
}

// Line reader that skips blank and '#' lines and reports positions.
class LineReader {
 public:
  explicit LineReader(const fs::path& path) : path_(path), in_(path) {
    if (!in_) throw FormatError("cannot open " + path.string());
  }

  bool next(std::istringstream& line) {
    std::string s;
    while (std::getline(in_, s)) {
      ++lineno_;
      const auto p = s.find_first_not_of(" \t\r");
      if (p == std::string::npos || s[p] == '#') continue;
      line = std::istringstream(s);
      return true;
    }
    return false;
  }

  std::istringstream require() {
    std::istringstream line;
    if (!next(line)) fail("unexpected end of file");
    return line;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw FormatError(path_.string() + ":" + std::to_string(lineno_) + ": " + what);
  }

  template <class T>
  T get(std::istringstream& line, const char* what) const {
    T v;
    if (!(line >> v)) fail(std::string("expected ") + what);
    return v;
  }

  void expect_end(std::istringstream& line) const {
    std::string extra;
    if (line >> extra) fail("unexpected trailing token '" + extra + "'");
  }

  std::size_t header(const char* keyword) {
    auto line = require();
    const auto word = get<std::string>(line, keyword);
    if (word != keyword) fail(std::string("expected '") + keyword + "' header");
    const auto n = get<std::size_t>(line, "count");
    expect_end(line);
    return n;
  }

 private:
  fs::path path_;
  std::ifstream in_;
  std::size_t lineno_ = 0;
};

}  // namespace

void write_mesh(const fs::path& path, const WedgeMesh& mesh) {
  auto out = open_out(path);
  out << "nodes " << mesh.num_nodes() << "\n";
  for (const auto& x : mesh.nodes()) {
    out << format_double(x.x()) << ' ' << format_double(x.y()) << ' ' << format_double(x.z())
        << "\n";
  }
  out << "elements " << mesh.num_elements() << "\n";
  for (const auto& e : mesh.elements()) {
    for (int a = 0; a < 6; ++a) out << e[a] << (a < 5 ? ' ' : '\n');
  }
  out << "boundaries " << mesh.num_boundaries() << "\n";
  for (const auto& b : mesh.boundaries()) {
    out << b.name << ' ' << b.nodes.size();
    for (std::size_t a : b.nodes) out << ' ' << a;
    out << "\n";
  }
}

WedgeMesh read_mesh(const fs::path& path) {
  LineReader r(path);
  const std::size_t nn = r.header("nodes");
  std::vector<Vec3> nodes(nn);
  for (auto& x : nodes) {
    auto line = r.require();
    for (int i = 0; i < 3; ++i) x[i] = r.get<double>(line, "coordinate");
    r.expect_end(line);
  }
  const std::size_t ne = r.header("elements");
  std::vector<WedgeNodes> elements(ne);
  for (auto& e : elements) {
    auto line = r.require();
    for (auto& a : e) a = r.get<std::size_t>(line, "node id");
    r.expect_end(line);
  }
  const std::size_t nb = r.header("boundaries");
  std::vector<BoundarySet> boundaries(nb);
  for (auto& b : boundaries) {
    auto line = r.require();
    b.name = r.get<std::string>(line, "boundary name");
    const auto n = r.get<std::size_t>(line, "node count");
    b.nodes.resize(n);
    for (auto& a : b.nodes) a = r.get<std::size_t>(line, "node id");
    r.expect_end(line);
  }
  try {
    return WedgeMesh(std::move(nodes), std::move(elements), std::move(boundaries));
  } catch (const InvalidArgument& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_displacement(const fs::path& path, const DisplacementField& field) {
  auto out = open_out(path);
  for (const auto& u : field.values) {
    out << format_double(u.x()) << ' ' << format_double(u.y()) << ' ' << format_double(u.z())
        << "\n";
  }
}

DisplacementField read_displacement(const fs::path& path, const WedgeMesh& mesh) {
  LineReader r(path);
  std::vector<Vec3> values;
  std::istringstream line;
  while (r.next(line)) {
    Vec3 u;
    for (int i = 0; i < 3; ++i) u[i] = r.get<double>(line, "displacement component");
    r.expect_end(line);
    values.push_back(u);
  }
  if (values.size() != mesh.num_nodes()) {
    throw FormatError(path.string() + ": " + std::to_string(values.size()) +
                      " displacement rows for a mesh of " + std::to_string(mesh.num_nodes()) +
                      " nodes");
  }
  return DisplacementField(std::move(values), mesh.id());
}

void write_segment_map(const fs::path& path, const SegmentMap& segments) {
  auto out = open_out(path);
  for (std::size_t e = 0; e < segments.size(); ++e) out << e << ' ' << segments[e] << "\n";
}

SegmentMap read_segment_map(const fs::path& path) {
  LineReader r(path);
  std::vector<int> labels;
  std::istringstream line;
  while (r.next(line)) {
    const auto first = r.get<long>(line, "segment id");
    long second = 0;
    if (line >> second) {
      if (first != static_cast<long>(labels.size())) r.fail("element ids must be consecutive from 0");
      r.expect_end(line);
      labels.push_back(static_cast<int>(second));
    } else {
      labels.push_back(static_cast<int>(first));
    }
  }
  try {
    return SegmentMap(std::move(labels));
  } catch (const InvalidArgument& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_params(const fs::path& path, const std::vector<MaterialParams>& params) {
  auto out = open_out(path);
  for (std::size_t k = 0; k < params.size(); ++k) {
    out << k + 1;
    for (Eigen::Index i = 0; i < params[k].theta.size(); ++i) {
      out << ' ' << format_double(params[k].theta[i]);
    }
    out << "\n";
  }
}

std::vector<MaterialParams> read_params(const fs::path& path) {
  LineReader r(path);
  std::vector<MaterialParams> out;
  std::istringstream line;
  while (r.next(line)) {
    const auto seg = r.get<std::size_t>(line, "segment id");
    if (seg != out.size() + 1) r.fail("segment ids must be consecutive from 1");
    std::vector<double> v;
    double x;
    while (line >> x) v.push_back(x);
    if (!line.eof()) r.fail("non-numeric parameter value");
    try {
      out.emplace_back(Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
    } catch (const InvalidArgument& e) {
      r.fail(e.what());
    }
  }
  return out;
}

void write_forces(const fs::path& path, const BoundaryForces& forces) {
  auto out = open_out(path);
  for (std::size_t k = 0; k < forces.size(); ++k) {
    out << forces.names[k];
    for (int i = 0; i < 3; ++i) out << ' ' << format_double(forces.R(static_cast<Eigen::Index>(k), i));
    out << "\n";
  }
}

BoundaryForces read_forces(const fs::path& path) {
  LineReader r(path);
  std::vector<std::string> names;
  std::vector<Vec3> rows;
  std::istringstream line;
  while (r.next(line)) {
    names.push_back(r.get<std::string>(line, "boundary name"));
    Vec3 f;
    for (int i = 0; i < 3; ++i) f[i] = r.get<double>(line, "force component");
    r.expect_end(line);
    if (!f.allFinite()) r.fail("non-finite force");
    rows.push_back(f);
  }
  BoundaryForces out;
  out.names = std::move(names);
  out.R.resize(static_cast<Eigen::Index>(rows.size()), 3);
  for (std::size_t k = 0; k < rows.size(); ++k) out.R.row(static_cast<Eigen::Index>(k)) = rows[k];
  return out;
}

void write_node_list(const fs::path& path, const std::vector<std::size_t>& nodes) {
  auto out = open_out(path);
  for (std::size_t a : nodes) out << a << "\n";
}

std::vector<std::size_t> read_node_list(const fs::path& path) {
  LineReader r(path);
  std::vector<std::size_t> out;
  std::istringstream line;
  while (r.next(line)) {
    out.push_back(r.get<std::size_t>(line, "node id"));
    r.expect_end(line);
  }
  return out;
}

void write_key_values(const fs::path& path, const KeyValues& kv) {
  auto out = open_out(path);
  for (const auto& [k, v] : kv) out << k << '=' << v << "\n";
}

KeyValues read_key_values(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  KeyValues kv;
  std::string s;
  std::size_t lineno = 0;
  auto trim = [](std::string t) {
    const auto b = t.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    const auto e = t.find_last_not_of(" \t\r");
    return t.substr(b, e - b + 1);
  };
  while (std::getline(in, s)) {
    ++lineno;
    if (const auto h = s.find('#'); h != std::string::npos) s.erase(h);
    s = trim(s);
    if (s.empty()) continue;
    const auto eq = s.find('=');
    const std::string where = path.string() + ":" + std::to_string(lineno) + ": ";
    if (eq == std::string::npos) throw FormatError(where + "expected key=value");
    const std::string key = trim(s.substr(0, eq));
    if (key.empty()) throw FormatError(where + "empty key");
    if (!kv.emplace(key, trim(s.substr(eq + 1))).second) {
      throw FormatError(where + "duplicate key '" + key + "'");
    }
  }
  return kv;
}

void write_system(const fs::path& path, const EquilibriumSystem& system) {
  {
    auto out = open_out(path);
    for (Eigen::Index r = 0; r < system.num_rows(); ++r) {
      for (Eigen::Index c = 0; c < system.num_cols(); ++c) {
        out << format_double(system.A(r, c)) << ' ';
      }
      out << format_double(system.b[r]) << "\n";
    }
  }
  auto out = open_out(path.string() + ".rows");
  for (const auto& tag : system.rows) {
    out << (tag.kind == RowTag::Kind::Free ? "free " : "fixed ") << tag.index << ' ' << tag.dir
        << "\n";
  }
}

void write_text(const fs::path& path, const std::string& text) {
  auto out = open_out(path);
  out << text;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace plateid
