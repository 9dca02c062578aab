#include "psipde/field_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <iterator>

namespace psipde {

namespace {

constexpr unsigned char kMagic[4] = {0x50, 0x53, 0x49, 0x47};

template <typename T>
void put_le(std::vector<unsigned char>& out, T value) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                               std::conditional_t<sizeof(T) == 2, std::uint16_t, std::uint8_t>>;
  const U bits = std::bit_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<unsigned char>(bits >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(std::vector<unsigned char> bytes) : bytes_(std::move(bytes)) {}

  template <typename T>
  T get() {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                                 std::conditional_t<sizeof(T) == 2, std::uint16_t, std::uint8_t>>;
    if (pos_ + sizeof(T) > bytes_.size()) throw Error(ErrorCode::truncated_payload, "truncated payload");
    U bits = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) bits |= static_cast<U>(static_cast<U>(bytes_[pos_ + i]) << (8 * i));
    pos_ += sizeof(T);
    return std::bit_cast<T>(bits);
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  const unsigned char* data() const { return bytes_.data(); }

 private:
  std::vector<unsigned char> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::size_t psig_header_size(std::size_t ndim) { return 4 + 2 + 1 + ndim * 8 + ndim * 16; }

void write_psig(const std::filesystem::path& path, const PsigArray& array) {
  const std::size_t ndim = array.dims.size();
  if (ndim < 2 || ndim > 3 || array.ranges.size() != ndim) {
    throw Error(ErrorCode::dimension_mismatch, "PSIG supports 2 or 3 axes with one range per axis");
  }
  std::size_t count = 1;
  for (auto d : array.dims) count *= d;
  if (count != array.values.size()) throw Error(ErrorCode::dimension_mismatch, "value count does not match dims");

  std::vector<unsigned char> bytes;
  bytes.reserve(psig_header_size(ndim) + 8 * count);
  bytes.insert(bytes.end(), std::begin(kMagic), std::end(kMagic));
  put_le<std::uint16_t>(bytes, kPsigVersion);
  put_le<std::uint8_t>(bytes, static_cast<std::uint8_t>(ndim));
  for (auto d : array.dims) put_le<std::uint64_t>(bytes, d);
  for (const auto& [lo, hi] : array.ranges) {
    put_le<double>(bytes, lo);
    put_le<double>(bytes, hi);
  }
  for (double v : array.values) put_le<double>(bytes, v);

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error(ErrorCode::io_failure, "cannot open " + path.string() + " for writing");
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw Error(ErrorCode::io_failure, "write failed for " + path.string());
}

PsigArray read_psig(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::io_failure, "cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw Error(ErrorCode::bad_magic, "bad magic");
  Reader r(std::move(bytes));
  for (int i = 0; i < 4; ++i) r.get<std::uint8_t>();
  const auto version = r.get<std::uint16_t>();
  if (version != kPsigVersion) {
    throw Error(ErrorCode::dimension_mismatch, "unsupported PSIG version " + std::to_string(version));
  }
  const auto ndim = r.get<std::uint8_t>();
  if (ndim < 2 || ndim > 3) throw Error(ErrorCode::dimension_mismatch, "PSIG ndim must be 2 or 3");
  PsigArray a;
  std::uint64_t count = 1;
  for (int i = 0; i < ndim; ++i) {
    a.dims.push_back(r.get<std::uint64_t>());
    count *= a.dims.back();
  }
  for (int i = 0; i < ndim; ++i) {
    const double lo = r.get<double>();
    const double hi = r.get<double>();
    a.ranges.emplace_back(lo, hi);
  }
  if (r.remaining() != count * 8) {
    if (r.remaining() < count * 8) throw Error(ErrorCode::truncated_payload, "truncated payload");
    throw Error(ErrorCode::dimension_mismatch, "payload size does not match declared dims");
  }
  a.values.resize(count);
  for (auto& v : a.values) v = r.get<double>();
  return a;
}

void write_field(const FieldTensor& f, const std::filesystem::path& path) {
  const Grid& g = f.grid();
  PsigArray a;
  a.dims = {g.nt(), g.nx()};
  a.ranges = {{g.t.min, g.t.max}, {g.x.min, g.x.max}};
  if (g.y) {
    a.dims.push_back(g.y->n);
    a.ranges.emplace_back(g.y->min, g.y->max);
  }
  a.values.assign(f.values().begin(), f.values().end());
  write_psig(path, a);
}

FieldTensor read_field(const std::filesystem::path& path) {
  PsigArray a = read_psig(path);
  auto axis = [&](std::size_t i) { return Axis{a.ranges[i].first, a.ranges[i].second, a.dims[i]}; };
  Grid g{axis(0), axis(1), std::nullopt};
  if (a.dims.size() == 3) g.y = axis(2);
  try {
    g.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::dimension_mismatch, std::string("invalid grid in PSIG file: ") + e.what());
  }
  return FieldTensor(g, std::move(a.values));
}

void write_field_csv(const FieldTensor& f, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::io_failure, "cannot open " + path.string() + " for writing");
  const Grid& g = f.grid();
  os << (g.y ? "t,x,y,u\n" : "t,x,u\n");
  os << std::setprecision(17);
  for (std::size_t it = 0; it < g.nt(); ++it) {
    for (std::size_t ix = 0; ix < g.nx(); ++ix) {
      for (std::size_t iy = 0; iy < g.ny(); ++iy) {
        os << g.t.at(it) << ',' << g.x.at(ix) << ',';
        if (g.y) os << g.y->at(iy) << ',';
        os << f(it, ix, iy) << '\n';
      }
    }
  }
  if (!os) throw Error(ErrorCode::io_failure, "write failed for " + path.string());
}

}  // namespace psipde
