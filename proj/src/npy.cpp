#include "csl/npy.hpp"

#include <cctype>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "csl/errors.hpp"

namespace csl::npy {

namespace {

constexpr char kMagic[6] = {'\x93', 'N', 'U', 'M', 'P', 'Y'};
constexpr size_t kPreambleLen = 10;  // magic + version + header length field
constexpr size_t kAlign = 64;

/// Position just past "'key':" plus any surrounding whitespace.
size_t value_pos(const std::string& header, const std::string& key) {
    const std::string needle = "'" + key + "'";
    size_t pos = header.find(needle);
    if (pos == std::string::npos) {
        throw FormatError("npy header missing key " + needle);
    }
    pos += needle.size();
    while (pos < header.size() &&
           std::isspace(static_cast<unsigned char>(header[pos]))) {
        ++pos;
    }
    if (pos >= header.size() || header[pos] != ':') {
        throw FormatError("npy header key " + needle + " not followed by ':'");
    }
    ++pos;
    while (pos < header.size() &&
           std::isspace(static_cast<unsigned char>(header[pos]))) {
        ++pos;
    }
    return pos;
}

std::string parse_quoted(const std::string& header, size_t pos) {
    if (pos >= header.size() || (header[pos] != '\'' && header[pos] != '"')) {
        throw FormatError("npy header descr is not a quoted string");
    }
    char quote = header[pos];
    size_t end = header.find(quote, pos + 1);
    if (end == std::string::npos) {
        throw FormatError("npy header has unterminated string");
    }
    return header.substr(pos + 1, end - pos - 1);
}

bool parse_bool(const std::string& header, size_t pos) {
    if (header.compare(pos, 4, "True") == 0) return true;
    if (header.compare(pos, 5, "False") == 0) return false;
    throw FormatError("npy header fortran_order is not True or False");
}

std::vector<size_t> parse_shape(const std::string& header, size_t pos) {
    if (pos >= header.size() || header[pos] != '(') {
        throw FormatError("npy header shape is not a tuple");
    }
    size_t end = header.find(')', pos);
    if (end == std::string::npos) {
        throw FormatError("npy header has unterminated shape tuple");
    }
    std::vector<size_t> shape;
    size_t i = pos + 1;
    while (i < end) {
        while (i < end && (header[i] == ' ' || header[i] == ',')) ++i;
        if (i == end) break;
        size_t start = i;
        while (i < end && std::isdigit(static_cast<unsigned char>(header[i]))) {
            ++i;
        }
        if (i == start) {
            throw FormatError("npy header shape contains a non-integer entry");
        }
        shape.push_back(std::stoull(header.substr(start, i - start)));
    }
    return shape;
}

Dtype dtype_from_descr(const std::string& descr) {
    if (descr == "<f4") return Dtype::Float32;
    if (descr == "<f8") return Dtype::Float64;
    if (descr == "|u1") return Dtype::Uint8;
    if (descr == "<i4") return Dtype::Int32;
    throw UnsupportedError("npy dtype '" + descr +
                           "' not handled (need <f4, <f8, |u1 or <i4)");
}

std::string shape_repr(const std::vector<size_t>& shape) {
    std::string out = "(";
    for (size_t i = 0; i < shape.size(); ++i) {
        out += std::to_string(shape[i]);
        out += shape.size() == 1 ? "," : (i + 1 < shape.size() ? ", " : "");
    }
    out += ")";
    return out;
}

}  // namespace

Tensor from_bytes(std::span<const std::byte> buffer) {
    if (buffer.size() < kPreambleLen) {
        throw FormatError("npy buffer shorter than the fixed preamble");
    }
    if (std::memcmp(buffer.data(), kMagic, sizeof(kMagic)) != 0) {
        throw FormatError("npy magic string missing");
    }
    const auto major = static_cast<unsigned char>(buffer[6]);
    const auto minor = static_cast<unsigned char>(buffer[7]);
    if (major == 2 || major == 3) {
        throw UnsupportedError("npy format version " + std::to_string(major) +
                               "." + std::to_string(minor) + " not handled");
    }
    if (major != 1) {
        throw FormatError("npy format version " + std::to_string(major) + "." +
                          std::to_string(minor) + " is not a known version");
    }
    const size_t header_len = static_cast<unsigned char>(buffer[8]) |
                              (static_cast<unsigned char>(buffer[9]) << 8);
    if (buffer.size() < kPreambleLen + header_len) {
        throw FormatError("npy buffer truncated inside the header");
    }
    const std::string header(
        reinterpret_cast<const char*>(buffer.data()) + kPreambleLen,
        header_len);

    const std::string descr = parse_quoted(header, value_pos(header, "descr"));
    const bool fortran = parse_bool(header, value_pos(header, "fortran_order"));
    const std::vector<size_t> shape =
        parse_shape(header, value_pos(header, "shape"));
    if (fortran) {
        throw UnsupportedError("npy fortran_order arrays not handled");
    }
    const Dtype dtype = dtype_from_descr(descr);

    unsigned __int128 count = 1;
    for (size_t d : shape) {
        count *= d;
        if (count > (unsigned __int128)1 << 62) {
            throw FormatError("npy shape element count is implausibly large");
        }
    }
    const size_t expected = static_cast<size_t>(count) * dtype_size(dtype);
    const size_t have = buffer.size() - kPreambleLen - header_len;
    if (have != expected) {
        throw FormatError("npy data section holds " + std::to_string(have) +
                          " bytes, shape needs " + std::to_string(expected));
    }
    std::vector<std::byte> data(expected);
    std::memcpy(data.data(), buffer.data() + kPreambleLen + header_len,
                expected);
    return Tensor(shape, dtype, std::move(data));
}

std::vector<std::byte> to_bytes(const Tensor& t) {
    // Dictionary literal followed by space padding and a newline, sized so
    // the data section starts on a 64-byte boundary (the layout numpy's own
    // writer produces).
    std::string dict = "{'descr': '";
    dict += dtype_descr(t.dtype());
    dict += "', 'fortran_order': False, 'shape': ";
    dict += shape_repr(t.shape());
    dict += ", }";

    const size_t pad = kAlign - ((kPreambleLen + dict.size() + 1) % kAlign);
    const size_t header_len = dict.size() + pad + 1;
    if (header_len > 0xffff) {
        throw FormatError("npy header does not fit the version 1.0 length field");
    }

    std::vector<std::byte> out;
    out.reserve(kPreambleLen + header_len + t.bytes().size());
    auto push = [&out](const void* p, size_t n) {
        const auto* b = static_cast<const std::byte*>(p);
        out.insert(out.end(), b, b + n);
    };
    push(kMagic, sizeof(kMagic));
    const unsigned char version[2] = {1, 0};
    push(version, 2);
    const unsigned char len_le[2] = {
        static_cast<unsigned char>(header_len & 0xff),
        static_cast<unsigned char>(header_len >> 8)};
    push(len_le, 2);
    push(dict.data(), dict.size());
    const std::string padding(pad, ' ');
    push(padding.data(), pad);
    const char newline = '\n';
    push(&newline, 1);
    push(t.bytes().data(), t.bytes().size());
    return out;
}

Tensor read_array(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open '" + path + "' for reading");
    }
    std::vector<std::byte> buffer;
    in.seekg(0, std::ios::end);
    const auto size = in.tellg();
    if (size < 0) {
        throw IoError("cannot determine size of '" + path + "'");
    }
    buffer.resize(static_cast<size_t>(size));
    in.seekg(0, std::ios::beg);
    in.read(reinterpret_cast<char*>(buffer.data()),
            static_cast<std::streamsize>(buffer.size()));
    if (!in) {
        throw IoError("read failed on '" + path + "'");
    }
    return from_bytes(buffer);
}

void write_array(const std::string& path, const Tensor& t) {
    const std::vector<std::byte> encoded = to_bytes(t);
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw IoError("cannot open '" + tmp + "' for writing");
        }
        out.write(reinterpret_cast<const char*>(encoded.data()),
                  static_cast<std::streamsize>(encoded.size()));
        out.flush();
        if (!out) {
            std::remove(tmp.c_str());
            throw IoError("write failed on '" + tmp + "'");
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::remove(tmp.c_str());
        throw IoError("cannot move '" + tmp + "' to '" + path +
                      "': " + ec.message());
    }
}

}  // namespace csl::npy
