// SPDX-License-Identifier: Apache-2.0
#pragma once

// Little-endian primitives shared by the KAT1/KAL1/KAM1 formats.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>

namespace kanli::io {

void write_u32(std::ostream& out, std::uint32_t value);
void write_u64(std::ostream& out, std::uint64_t value);
void write_f32(std::ostream& out, float value);
void write_f64(std::ostream& out, double value);
void write_magic(std::ostream& out, std::string_view magic);
/// u32 byte length followed by the raw bytes.
void write_string(std::ostream& out, std::string_view text);

// Readers throw FormatError on a short read.
std::uint32_t read_u32(std::istream& in);
std::uint64_t read_u64(std::istream& in);
float read_f32(std::istream& in);
double read_f64(std::istream& in);
void expect_magic(std::istream& in, std::string_view magic);
std::string read_string(std::istream& in);

/// Whole-file helpers; throw IoError.
std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& bytes);

}  // namespace kanli::io
