#include "trslab/latent_io.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace trslab {
namespace {

void put_f32_le(std::string& out, float v) {
  std::uint32_t bits = std::bit_cast<std::uint32_t>(v);
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
  char buf[4];
  std::memcpy(buf, &bits, 4);
  out.append(buf, 4);
}

float get_f32_le(const char* p) {
  std::uint32_t bits;
  std::memcpy(&bits, p, 4);
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
  return std::bit_cast<float>(bits);
}

}  // namespace

std::string to_f32_le(const FrameMatrix<double>& m) {
  std::string out;
  out.reserve(static_cast<std::size_t>(m.size()) * 4);
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) put_f32_le(out, static_cast<float>(m(i, j)));
  return out;
}

FrameMatrix<double> from_f32_le(const std::string& bytes, Index rows, Index cols) {
  require(static_cast<Index>(bytes.size()) == rows * cols * 4, "float32 payload length does not match shape");
  FrameMatrix<double> m(rows, cols);
  const char* p = bytes.data();
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j, p += 4) m(i, j) = get_f32_le(p);
  return m;
}

void write_latent(std::ostream& out, const VideoLatent& x) {
  const FrameShape& s = x.shape();
  out << "TRSLAT1 " << x.frame_count() << ' ' << s.channels << ' ' << s.height << ' ' << s.width
      << " dtype=f32 endian=LE\n";
  const std::string payload = to_f32_le(x.frames());
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  require(static_cast<bool>(out), "failed writing latent dump");
}

void write_latent(const std::filesystem::path& path, const VideoLatent& x) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), "cannot open " + path.string());
  write_latent(out, x);
}

VideoLatent read_latent(std::istream& in) {
  std::string header;
  require(static_cast<bool>(std::getline(in, header)), "missing latent dump header");
  std::istringstream hs(header);
  std::string magic, dtype, endian;
  Index n = 0;
  FrameShape s;
  hs >> magic >> n >> s.channels >> s.height >> s.width >> dtype >> endian;
  require(magic == "TRSLAT1" && dtype == "dtype=f32" && endian == "endian=LE", "bad latent dump header: " + header);
  require(n >= 2 && s.size() > 0, "bad latent dump dimensions");
  std::string payload(static_cast<std::size_t>(n * s.size() * 4), '\0');
  in.read(payload.data(), static_cast<std::streamsize>(payload.size()));
  require(in.gcount() == static_cast<std::streamsize>(payload.size()), "truncated latent dump");
  return VideoLatent(s, from_f32_le(payload, n, s.size()));
}

VideoLatent read_latent(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), "cannot open " + path.string());
  return read_latent(in);
}

void write_pgm_frames(const std::filesystem::path& dir, const std::string& stem, const VideoLatent& x) {
  std::filesystem::create_directories(dir);
  const FrameShape& s = x.shape();
  const Index plane = s.height * s.width;
  const auto channel0 = x.frames().leftCols(plane);
  const double lo = channel0.minCoeff();
  const double hi = channel0.maxCoeff();
  const double scale = hi > lo ? 255.0 / (hi - lo) : 0.0;

  for (Index f = 0; f < x.frame_count(); ++f) {
    std::ostringstream name;
    name << stem << '_' << std::setw(3) << std::setfill('0') << f + 1 << ".pgm";
    std::ofstream out(dir / name.str(), std::ios::binary);
    require(static_cast<bool>(out), "cannot open " + (dir / name.str()).string());
    out << "P5\n" << s.width << ' ' << s.height << "\n255\n";
    std::string row(static_cast<std::size_t>(plane), '\0');
    for (Index p = 0; p < plane; ++p) {
      const double v = (channel0(f, p) - lo) * scale;
      row[static_cast<std::size_t>(p)] = static_cast<char>(static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 255.0))));
    }
    out.write(row.data(), static_cast<std::streamsize>(row.size()));
  }
}

}  // namespace trslab
