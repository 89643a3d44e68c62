#ifndef AICLAB_IO_HPP
#define AICLAB_IO_HPP

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <type_traits>

#include "aiclab/errors.hpp"
#include "aiclab/linalg.hpp"

namespace aiclab::io {

/// Decimal text with enough digits to round-trip a double.
inline std::string format_double(double x) {
    std::ostringstream os;
    os << std::setprecision(std::numeric_limits<double>::max_digits10) << x;
    return os.str();
}

/// Dense CSV block: one matrix row per line, 17 significant digits.
inline void write_csv(std::ostream& os, const Matrix& m) {
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) {
            if (j) os << ',';
            os << format_double(m(i, j));
        }
        os << '\n';
    }
}

inline Matrix read_csv(std::istream& is) {
    std::vector<double> values;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line == "\r") continue;
        std::size_t count = 0;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                values.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw FormatError("bad CSV cell '" + cell + "' on row " + std::to_string(rows));
            }
            ++count;
        }
        if (rows == 0) cols = count;
        if (count != cols) throw FormatError("ragged CSV row " + std::to_string(rows));
        ++rows;
    }
    Matrix m(rows, cols);
    m.data() = std::move(values);
    return m;
}

// Little-endian primitives.

template <typename T>
void write_le(std::ostream& os, T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    std::array<unsigned char, sizeof(T)> bytes{};
    std::memcpy(bytes.data(), &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    os.write(reinterpret_cast<const char*>(bytes.data()), sizeof(T));
}

template <typename T>
T read_le(std::istream& is) {
    static_assert(std::is_trivially_copyable_v<T>);
    std::array<unsigned char, sizeof(T)> bytes{};
    if (!is.read(reinterpret_cast<char*>(bytes.data()), sizeof(T)))
        throw FormatError("unexpected end of binary stream");
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    T value;
    std::memcpy(&value, bytes.data(), sizeof(T));
    return value;
}

inline void expect_magic(std::istream& is, const char (&magic)[5]) {
    char got[4];
    if (!is.read(got, 4) || std::memcmp(got, magic, 4) != 0)
        throw FormatError(std::string("bad magic; expected ") + magic);
}

/// Binary matrix: "AICM", u32 version=1, u64 rows, u64 cols, row-major f64 (LE).
inline void write_binary(std::ostream& os, const Matrix& m) {
    os.write("AICM", 4);
    write_le<std::uint32_t>(os, 1);
    write_le<std::uint64_t>(os, m.rows());
    write_le<std::uint64_t>(os, m.cols());
    for (double x : m.data()) write_le<double>(os, x);
}

inline Matrix read_binary(std::istream& is) {
    expect_magic(is, "AICM");
    const auto version = read_le<std::uint32_t>(is);
    if (version != 1) throw FormatError("unsupported matrix version " + std::to_string(version));
    const auto rows = read_le<std::uint64_t>(is);
    const auto cols = read_le<std::uint64_t>(is);
    Matrix m(rows, cols);
    for (double& x : m.data()) x = read_le<double>(is);
    return m;
}

/// FNV-1a 64-bit digest as 16 hex digits.
inline std::string fnv1a_hex(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

}  // namespace aiclab::io

#endif  // AICLAB_IO_HPP
