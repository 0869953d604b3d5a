#include <charconv>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string_view>

#include "thinshell/errors.hpp"
#include "thinshell/mesh2d.hpp"

namespace thinshell::mesh2d {

namespace {

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) { buf_.reserve(1 << 16); }
  ~Writer() { flush(); }

  Writer& word(std::string_view s) {
    sep();
    buf_.append(s);
    return *this;
  }
  template <typename T>
  Writer& num(T v) {
    sep();
    char tmp[32];
    const auto r = std::to_chars(tmp, tmp + sizeof tmp, v);
    buf_.append(tmp, r.ptr);
    return *this;
  }
  void endl() {
    buf_.push_back('\n');
    first_ = true;
    if (buf_.size() > (1 << 16) - 256) flush();
  }
  void flush() {
    out_.write(buf_.data(), static_cast<std::streamsize>(buf_.size()));
    buf_.clear();
  }

 private:
  void sep() {
    if (!first_) buf_.push_back(' ');
    first_ = false;
  }
  std::ostream& out_;
  std::string buf_;
  bool first_ = true;
};

class Reader {
 public:
  explicit Reader(std::string text) : text_(std::move(text)) {}

  // Advances to the next non-empty line; false at end of input.
  bool next_line() {
    while (pos_ < text_.size()) {
      const auto end = text_.find('\n', pos_);
      const auto stop = end == std::string::npos ? text_.size() : end;
      line_ = std::string_view(text_).substr(pos_, stop - pos_);
      pos_ = stop + 1;
      ++lineno_;
      if (line_.find_first_not_of(" \t\r") != std::string_view::npos) return true;
    }
    return false;
  }
  std::size_t lineno() const { return lineno_; }

  std::string_view token() {
    const auto b = line_.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) fail("unexpected end of line");
    const auto e = line_.find_first_of(" \t\r", b);
    const auto tok = line_.substr(b, e == std::string_view::npos ? std::string_view::npos : e - b);
    line_ = e == std::string_view::npos ? std::string_view() : line_.substr(e);
    return tok;
  }
  template <typename T>
  T num() {
    const auto tok = token();
    T v{};
    const auto r = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (r.ec != std::errc() || r.ptr != tok.data() + tok.size()) fail("malformed number '" + std::string(tok) + "'");
    return v;
  }
  void end_of_line() {
    if (line_.find_first_not_of(" \t\r") != std::string_view::npos) fail("trailing tokens");
  }
  void expect_section(std::string_view name) {
    if (!next_line()) fail("missing " + std::string(name) + " section");
    const auto tok = token();
    if (tok != name) fail("expected " + std::string(name) + " section, found '" + std::string(tok) + "'");
  }
  [[noreturn]] void fail(const std::string& what) const { throw ParseError(what, lineno_); }

 private:
  std::string text_;
  std::size_t pos_ = 0;
  std::size_t lineno_ = 0;
  std::string_view line_;
};

MeshKind parse_kind(Reader& r, std::string_view s) {
  if (s == "plain") return MeshKind::plain;
  if (s == "ts") return MeshKind::ts;
  if (s == "volume") return MeshKind::volume;
  r.fail("unknown mesh kind '" + std::string(s) + "'");
}

}  // namespace

void write_mesh(std::ostream& out, const Mesh2D& mesh) {
  Writer w(out);
  w.word("MESH").word(to_string(mesh.kind));
  w.endl();
  w.word("NODES").num(mesh.nodes.size());
  w.endl();
  for (const auto& p : mesh.nodes) {
    w.num(p.x()).num(p.y());
    w.endl();
  }
  w.word("TRIANGLES").num(mesh.triangles.size());
  w.endl();
  for (const auto& t : mesh.triangles) {
    w.num(t.v[0]).num(t.v[1]).num(t.v[2]).num(static_cast<int>(t.region));
    w.endl();
  }
  w.word("EDGES").num(mesh.edges.size());
  w.endl();
  for (const auto& e : mesh.edges) {
    w.num(e.v[0]).num(e.v[1]).num(static_cast<int>(e.tag));
    w.endl();
  }
  if (mesh.has_crack()) {
    w.word("CRACK").num(mesh.crack_pairs.size()).num(mesh.crack_endpoints[0]).num(mesh.crack_endpoints[1]);
    w.endl();
    for (const auto& p : mesh.crack_pairs) {
      w.num(p.plus).num(p.minus);
      w.endl();
    }
  }
  w.word("CUTS").num(mesh.cut_paths.size());
  w.endl();
  for (const auto& path : mesh.cut_paths) {
    w.num(path.size());
    for (int v : path) w.num(v);
    w.endl();
  }
  w.word("END");
  w.endl();
}

Mesh2D read_mesh(std::istream& in) {
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Reader r(std::move(text));
  Mesh2D m;
  r.expect_section("MESH");
  m.kind = parse_kind(r, r.token());
  r.end_of_line();

  r.expect_section("NODES");
  const auto nn = r.num<std::size_t>();
  r.end_of_line();
  m.nodes.resize(nn);
  for (auto& p : m.nodes) {
    if (!r.next_line()) r.fail("NODES section truncated");
    p.x() = r.num<double>();
    p.y() = r.num<double>();
    r.end_of_line();
  }
  auto check_node = [&](int v) {
    if (v < 0 || static_cast<std::size_t>(v) >= nn) r.fail("node index " + std::to_string(v) + " out of range");
    return v;
  };

  r.expect_section("TRIANGLES");
  const auto nt = r.num<std::size_t>();
  r.end_of_line();
  m.triangles.resize(nt);
  for (auto& t : m.triangles) {
    if (!r.next_line()) r.fail("TRIANGLES section truncated");
    for (auto& v : t.v) v = check_node(r.num<int>());
    const int region = r.num<int>();
    if (region < 0 || region > 3) r.fail("unknown region tag " + std::to_string(region));
    t.region = static_cast<Region>(region);
    r.end_of_line();
  }

  r.expect_section("EDGES");
  const auto ne = r.num<std::size_t>();
  r.end_of_line();
  m.edges.resize(ne);
  for (auto& e : m.edges) {
    if (!r.next_line()) r.fail("EDGES section truncated");
    for (auto& v : e.v) v = check_node(r.num<int>());
    const int tag = r.num<int>();
    if (tag < 0 || tag > 2) r.fail("unknown edge tag " + std::to_string(tag));
    e.tag = static_cast<EdgeTag>(tag);
    r.end_of_line();
  }

  if (!r.next_line()) r.fail(m.kind == MeshKind::ts ? "missing CRACK section" : "missing CUTS section");
  auto tok = r.token();
  if (tok == "CRACK") {
    const auto np = r.num<std::size_t>();
    m.crack_endpoints[0] = check_node(r.num<int>());
    m.crack_endpoints[1] = check_node(r.num<int>());
    r.end_of_line();
    m.crack_pairs.resize(np);
    for (auto& p : m.crack_pairs) {
      if (!r.next_line()) r.fail("CRACK section truncated");
      p.plus = check_node(r.num<int>());
      p.minus = check_node(r.num<int>());
      r.end_of_line();
    }
    if (!r.next_line()) r.fail("missing CUTS section");
    tok = r.token();
  } else if (m.kind == MeshKind::ts) {
    r.fail("missing CRACK section for a ts mesh, found '" + std::string(tok) + "'");
  }
  if (tok != "CUTS") r.fail("expected CUTS section, found '" + std::string(tok) + "'");
  const auto nc = r.num<std::size_t>();
  r.end_of_line();
  m.cut_paths.resize(nc);
  for (auto& path : m.cut_paths) {
    if (!r.next_line()) r.fail("CUTS section truncated");
    const auto len = r.num<std::size_t>();
    path.resize(len);
    for (auto& v : path) v = check_node(r.num<int>());
    r.end_of_line();
  }
  r.expect_section("END");
  r.end_of_line();
  return m;
}

void write_mesh(const std::string& path, const Mesh2D& mesh) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("write_mesh: cannot open " + path);
  write_mesh(out, mesh);
  if (!out) throw InvalidArgument("write_mesh: write failed for " + path);
}

Mesh2D read_mesh(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("read_mesh: cannot open " + path);
  return read_mesh(in);
}

}  // namespace thinshell::mesh2d
