#include "bm3/fmat.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

namespace bm3::fmat {
namespace {

template <typename T>
void put_le(std::vector<unsigned char>& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
}

template <typename T>
T get_le(const unsigned char* p) {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(p[i]) << (8 * i);
  return v;
}

}  // namespace

void write(const std::filesystem::path& path, const Matrix& values) {
  std::vector<unsigned char> buf;
  buf.reserve(kHeaderBytes + static_cast<std::size_t>(values.size()) * 4);
  buf.insert(buf.end(), {'F', 'M', 'A', 'T'});
  put_le<std::uint32_t>(buf, kVersion);
  put_le<std::uint64_t>(buf, static_cast<std::uint64_t>(values.rows()));
  put_le<std::uint64_t>(buf, static_cast<std::uint64_t>(values.cols()));
  for (Index r = 0; r < values.rows(); ++r)
    for (Index c = 0; c < values.cols(); ++c)
      put_le<std::uint32_t>(buf, std::bit_cast<std::uint32_t>(static_cast<float>(values(r, c))));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw DataError("write failed: " + path.string());
}

Matrix read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open FMAT file: " + path.string());
  std::array<unsigned char, kHeaderBytes> header{};
  in.read(reinterpret_cast<char*>(header.data()), header.size());
  if (in.gcount() != static_cast<std::streamsize>(header.size()))
    throw DataError("truncated FMAT header: " + path.string());
  if (std::memcmp(header.data(), "FMAT", 4) != 0) throw DataError("bad magic in " + path.string());
  const auto version = get_le<std::uint32_t>(header.data() + 4);
  if (version != kVersion)
    throw DataError("unsupported FMAT version " + std::to_string(version) + " in " + path.string());
  const auto rows = get_le<std::uint64_t>(header.data() + 8);
  const auto cols = get_le<std::uint64_t>(header.data() + 16);
  if (cols != 0 && rows > (std::uint64_t{1} << 40) / cols)
    throw DataError("implausible FMAT shape in " + path.string());

  std::vector<unsigned char> payload(rows * cols * 4);
  in.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
  if (static_cast<std::uint64_t>(in.gcount()) != payload.size())
    throw DataError("truncated FMAT payload: " + path.string());

  Matrix m(static_cast<Index>(rows), static_cast<Index>(cols));
  const unsigned char* p = payload.data();
  for (std::uint64_t r = 0; r < rows; ++r) {
    for (std::uint64_t c = 0; c < cols; ++c, p += 4) {
      float v = std::bit_cast<float>(get_le<std::uint32_t>(p));
      if (!std::isfinite(v)) {
        std::ostringstream msg;
        msg << "non-finite value at (" << r << ", " << c << ") in " << path.string();
        throw DataError(msg.str());
      }
      m(static_cast<Index>(r), static_cast<Index>(c)) = v;
    }
  }
  return m;
}

}  // namespace bm3::fmat
