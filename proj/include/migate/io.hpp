#pragma once

#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>

#include "migate/tensor.hpp"

namespace migate {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct BadMagicError : IoError {
  using IoError::IoError;
};
struct VersionError : IoError {
  using IoError::IoError;
};
struct TruncatedError : IoError {
  using IoError::IoError;
};

namespace io {

// little-endian scalar writers/readers; read_* throw TruncatedError on EOF
void write_u16(std::ostream& os, uint16_t v);
void write_u32(std::ostream& os, uint32_t v);
void write_u64(std::ostream& os, uint64_t v);
void write_u8(std::ostream& os, uint8_t v);
uint16_t read_u16(std::istream& is, const std::string& what);
uint32_t read_u32(std::istream& is, const std::string& what);
uint64_t read_u64(std::istream& is, const std::string& what);
uint8_t read_u8(std::istream& is, const std::string& what);

// payload values at the current global precision (tag 4 = f32, 8 = f64)
uint8_t precision_tag();
void write_values(std::ostream& os, const Tensor& t, uint8_t tag);
void read_values(std::istream& is, Tensor& t, uint8_t tag,
                 const std::string& what);

void expect_magic(std::istream& is, const char magic[4],
                  const std::string& what);

std::ofstream open_out(const std::string& path);
std::ifstream open_in(const std::string& path);

}  // namespace io
}  // namespace migate
