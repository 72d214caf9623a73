#include "migate/io.hpp"

#include <cstring>

namespace migate::io {

namespace {
template <typename T>
void write_le(std::ostream& os, T v) {
  unsigned char buf[sizeof(T)];
  for (size_t i = 0; i < sizeof(T); ++i)
    buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T read_le(std::istream& is, const std::string& what) {
  unsigned char buf[sizeof(T)];
  is.read(reinterpret_cast<char*>(buf), sizeof(T));
  if (is.gcount() != static_cast<std::streamsize>(sizeof(T)))
    throw TruncatedError("truncated file while reading " + what);
  T v = 0;
  for (size_t i = 0; i < sizeof(T); ++i)
    v |= static_cast<T>(buf[i]) << (8 * i);
  return v;
}
}  // namespace

void write_u16(std::ostream& os, uint16_t v) { write_le(os, v); }
void write_u32(std::ostream& os, uint32_t v) { write_le(os, v); }
void write_u64(std::ostream& os, uint64_t v) { write_le(os, v); }
void write_u8(std::ostream& os, uint8_t v) { write_le(os, v); }
uint16_t read_u16(std::istream& is, const std::string& what) { return read_le<uint16_t>(is, what); }
uint32_t read_u32(std::istream& is, const std::string& what) { return read_le<uint32_t>(is, what); }
uint64_t read_u64(std::istream& is, const std::string& what) { return read_le<uint64_t>(is, what); }
uint8_t read_u8(std::istream& is, const std::string& what) { return read_le<uint8_t>(is, what); }

uint8_t precision_tag() { return precision() == Precision::f32 ? 4 : 8; }

void write_values(std::ostream& os, const Tensor& t, uint8_t tag) {
  const double* p = t.data();
  if (tag == 4) {
    for (size_t i = 0; i < t.size(); ++i) {
      float f = static_cast<float>(p[i]);
      uint32_t bits;
      std::memcpy(&bits, &f, 4);
      write_u32(os, bits);
    }
  } else if (tag == 8) {
    for (size_t i = 0; i < t.size(); ++i) {
      uint64_t bits;
      std::memcpy(&bits, &p[i], 8);
      write_u64(os, bits);
    }
  } else {
    throw IoError("unknown precision tag " + std::to_string(tag));
  }
}

void read_values(std::istream& is, Tensor& t, uint8_t tag,
                 const std::string& what) {
  double* p = t.mutable_data();
  if (tag == 4) {
    for (size_t i = 0; i < t.size(); ++i) {
      uint32_t bits = read_u32(is, what);
      float f;
      std::memcpy(&f, &bits, 4);
      p[i] = f;
    }
  } else if (tag == 8) {
    for (size_t i = 0; i < t.size(); ++i) {
      uint64_t bits = read_u64(is, what);
      std::memcpy(&p[i], &bits, 8);
    }
  } else {
    throw IoError(what + ": unknown precision tag " + std::to_string(tag));
  }
}

void expect_magic(std::istream& is, const char magic[4],
                  const std::string& what) {
  char buf[4];
  is.read(buf, 4);
  if (is.gcount() != 4)
    throw TruncatedError("truncated file while reading " + what + " magic");
  if (std::memcmp(buf, magic, 4) != 0)
    throw BadMagicError(what + ": bad magic bytes, expected '" +
                        std::string(magic, 4) + "'");
}

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  return os;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path + "' for reading");
  return is;
}

}  // namespace migate::io
