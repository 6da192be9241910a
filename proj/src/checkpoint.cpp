#include "rd2v/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <vector>

#include "rd2v/errors.hpp"

namespace rd2v {

namespace fs = std::filesystem;

namespace {

class Writer {
 public:
  explicit Writer(std::ostream& os) : os_(os) {}

  void u32(std::uint32_t v) { bytes(v, 4); }
  void u64(std::uint64_t v) { bytes(v, 8); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void raw(std::string_view s) { os_.write(s.data(), std::streamsize(s.size())); }

 private:
  void bytes(std::uint64_t v, int n) {
    char buf[8];
    for (int i = 0; i < n; ++i) buf[i] = char((v >> (8 * i)) & 0xFF);
    os_.write(buf, n);
  }
  std::ostream& os_;
};

class Reader {
 public:
  Reader(std::vector<unsigned char> data, std::string source)
      : data_(std::move(data)), source_(std::move(source)) {}

  std::uint32_t u32() { return std::uint32_t(bytes(4)); }
  std::uint64_t u64() { return bytes(8); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string raw(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) throw FormatError(source_ + ": truncated checkpoint");
  }
  std::uint64_t bytes(int n) {
    need(std::size_t(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= std::uint64_t(data_[pos_ + std::size_t(i)]) << (8 * i);
    pos_ += std::size_t(n);
    return v;
  }

  std::vector<unsigned char> data_;
  std::string source_;
  std::size_t pos_ = 0;
};

void write_set(Writer& w, const std::string& prefix, const ParameterSet& set) {
  for (const auto& [name, m] : set) {
    const std::string full = prefix + name;
    w.u32(std::uint32_t(full.size()));
    w.raw(full);
    w.u64(m.rows());
    w.u64(m.cols());
    for (Real v : m.data()) w.f64(v);
  }
}

} // namespace

void save_checkpoint(const fs::path& path, const Checkpoint& ckpt) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  // Write to a sibling file and rename so readers never see a partial file.
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write checkpoint " + tmp.string());
    Writer w(out);
    w.raw(std::string_view(kCheckpointMagic, 4));
    w.u32(kCheckpointVersion);
    w.u64(ckpt.config_digest);
    w.u64(std::uint64_t(ckpt.step));
    w.u64(ckpt.seed);
    w.u64(ckpt.config_json.size());
    w.raw(ckpt.config_json);
    w.u64(ckpt.student.size() + ckpt.teacher.size() + ckpt.adam_m.size() + ckpt.adam_v.size());
    write_set(w, "student/", ckpt.student);
    write_set(w, "teacher/", ckpt.teacher);
    write_set(w, "adam.m/", ckpt.adam_m);
    write_set(w, "adam.v/", ckpt.adam_v);
    if (!out) throw FormatError("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

Checkpoint load_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint " + path.string());
  std::vector<unsigned char> data((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  Reader r(std::move(data), path.string());
  if (r.raw(4) != std::string_view(kCheckpointMagic, 4)) {
    throw FormatError(path.string() + ": not an RD2V checkpoint");
  }
  const auto version = r.u32();
  if (version != kCheckpointVersion) {
    throw FormatError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ckpt;
  ckpt.config_digest = r.u64();
  ckpt.step = std::int64_t(r.u64());
  ckpt.seed = r.u64();
  ckpt.config_json = r.raw(r.u64());
  const auto count = r.u64();
  for (std::uint64_t b = 0; b < count; ++b) {
    const std::string name = r.raw(r.u32());
    const auto rows = r.u64();
    const auto cols = r.u64();
    std::vector<Real> values(rows * cols);
    for (auto& v : values) v = r.f64();
    Matrix m = Matrix::from_data(rows, cols, std::move(values));
    const auto slash = name.find('/');
    if (slash == std::string::npos) throw FormatError("unprefixed blob '" + name + "'");
    const std::string prefix = name.substr(0, slash);
    const std::string rest = name.substr(slash + 1);
    if (prefix == "student") ckpt.student.add(rest, std::move(m));
    else if (prefix == "teacher") ckpt.teacher.add(rest, std::move(m));
    else if (prefix == "adam.m") ckpt.adam_m.add(rest, std::move(m));
    else if (prefix == "adam.v") ckpt.adam_v.add(rest, std::move(m));
    else throw FormatError("unknown blob prefix in '" + name + "'");
  }
  if (!r.done()) throw FormatError(path.string() + ": trailing bytes after blobs");
  require_matching(ckpt.student, ckpt.teacher);
  return ckpt;
}

fs::path checkpoint_path(const fs::path& dir, std::int64_t step) {
  std::ostringstream name;
  name << "checkpoint_" << std::setw(6) << std::setfill('0') << step << ".rd2v";
  return dir / name.str();
}

} // namespace rd2v
