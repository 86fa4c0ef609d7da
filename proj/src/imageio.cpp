#include "wmforge/imageio.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace wmforge {

std::vector<std::uint8_t> quantize8(const Image& img) {
    std::vector<std::uint8_t> out(img.px.size());
    for (std::size_t i = 0; i < img.px.size(); ++i) {
        float v = std::clamp(img.px[i], 0.0f, 1.0f) * 255.0f;
        out[i] = std::uint8_t(std::lround(v));
    }
    return out;
}

Image from_bytes(const std::vector<std::uint8_t>& bytes, int h, int w, int c) {
    if (bytes.size() != std::size_t(h) * w * c) throw std::invalid_argument("byte count mismatch");
    Image img(h, w, c);
    for (std::size_t i = 0; i < bytes.size(); ++i) img.px[i] = float(bytes[i]) / 255.0f;
    return img;
}

namespace {

void put_u32(std::vector<std::uint8_t>& v, std::uint32_t x) {
    v.push_back(std::uint8_t(x >> 24));
    v.push_back(std::uint8_t(x >> 16));
    v.push_back(std::uint8_t(x >> 8));
    v.push_back(std::uint8_t(x));
}

std::uint32_t get_u32(const std::uint8_t* p) {
    return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
           (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
}

void append_chunk(std::vector<std::uint8_t>& out, const char type[4],
                  const std::uint8_t* data, std::size_t len) {
    put_u32(out, std::uint32_t(len));
    std::size_t start = out.size();
    out.insert(out.end(), type, type + 4);
    if (len) out.insert(out.end(), data, data + len);
    std::uint32_t crc = ::crc32(0, out.data() + start, uInt(4 + len));
    put_u32(out, crc);
}

std::vector<std::uint8_t> zlib_deflate(const std::uint8_t* data, std::size_t len) {
    uLongf bound = ::compressBound(uLong(len));
    std::vector<std::uint8_t> out(bound);
    if (::compress2(out.data(), &bound, data, uLong(len), 6) != Z_OK)
        throw std::runtime_error("deflate failed");
    out.resize(bound);
    return out;
}

std::vector<std::uint8_t> zlib_inflate(const std::uint8_t* data, std::size_t len,
                                       std::size_t expected) {
    std::vector<std::uint8_t> out(expected);
    uLongf got = uLongf(expected);
    int rc = ::uncompress(out.data(), &got, data, uLong(len));
    if (rc != Z_OK || got != expected) throw std::runtime_error("inflate failed");
    return out;
}

int paeth(int a, int b, int c) {
    int p = a + b - c;
    int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return a;
    if (pb <= pc) return b;
    return c;
}

void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    if (!f) throw std::runtime_error("short write: " + path);
}

std::vector<std::uint8_t> read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open: " + path);
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(f),
                                     std::istreambuf_iterator<char>());
}

} // namespace

void write_png8(const std::string& path, const std::vector<std::uint8_t>& bytes,
                int h, int w, int c) {
    if (c != 1 && c != 3) throw std::invalid_argument("png writer handles gray or rgb");
    if (bytes.size() != std::size_t(h) * w * c) throw std::invalid_argument("byte count mismatch");

    std::size_t stride = std::size_t(w) * c;
    std::vector<std::uint8_t> raw;
    raw.reserve((stride + 1) * h);
    for (int y = 0; y < h; ++y) {
        raw.push_back(0); // filter: none
        raw.insert(raw.end(), bytes.begin() + std::size_t(y) * stride,
                   bytes.begin() + std::size_t(y + 1) * stride);
    }
    std::vector<std::uint8_t> idat = zlib_deflate(raw.data(), raw.size());

    std::vector<std::uint8_t> out = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
    std::uint8_t ihdr[13];
    ihdr[0] = std::uint8_t(std::uint32_t(w) >> 24);
    ihdr[1] = std::uint8_t(std::uint32_t(w) >> 16);
    ihdr[2] = std::uint8_t(std::uint32_t(w) >> 8);
    ihdr[3] = std::uint8_t(w);
    ihdr[4] = std::uint8_t(std::uint32_t(h) >> 24);
    ihdr[5] = std::uint8_t(std::uint32_t(h) >> 16);
    ihdr[6] = std::uint8_t(std::uint32_t(h) >> 8);
    ihdr[7] = std::uint8_t(h);
    ihdr[8] = 8;                            // bit depth
    ihdr[9] = (c == 3) ? 2 : 0;             // color type
    ihdr[10] = ihdr[11] = ihdr[12] = 0;     // deflate, adaptive, no interlace
    append_chunk(out, "IHDR", ihdr, 13);
    append_chunk(out, "IDAT", idat.data(), idat.size());
    append_chunk(out, "IEND", nullptr, 0);
    write_file(path, out);
}

void write_png(const std::string& path, const Image& img) {
    write_png8(path, quantize8(img), img.h, img.w, img.c);
}

void write_ppm(const std::string& path, const Image& img) {
    if (img.c != 1 && img.c != 3) throw std::invalid_argument("ppm writer handles gray or rgb");
    std::vector<std::uint8_t> bytes = quantize8(img);
    std::string header = (img.c == 3 ? "P6\n" : "P5\n") + std::to_string(img.w) + " " +
                         std::to_string(img.h) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.insert(out.end(), bytes.begin(), bytes.end());
    write_file(path, out);
}

namespace {

Image decode_png(const std::vector<std::uint8_t>& buf) {
    if (buf.size() < 8 + 25) throw std::runtime_error("truncated png");
    int w = 0, h = 0, depth = 0, color = 0, interlace = 0;
    std::vector<std::uint8_t> idat;
    std::size_t pos = 8;
    while (pos + 8 <= buf.size()) {
        std::uint32_t len = get_u32(&buf[pos]);
        if (pos + 12 + len > buf.size()) throw std::runtime_error("corrupt png chunk");
        const char* type = reinterpret_cast<const char*>(&buf[pos + 4]);
        const std::uint8_t* data = &buf[pos + 8];
        if (std::memcmp(type, "IHDR", 4) == 0) {
            w = int(get_u32(data));
            h = int(get_u32(data + 4));
            depth = data[8];
            color = data[9];
            interlace = data[12];
        } else if (std::memcmp(type, "IDAT", 4) == 0) {
            idat.insert(idat.end(), data, data + len);
        } else if (std::memcmp(type, "IEND", 4) == 0) {
            break;
        }
        pos += 12 + len;
    }
    if (w <= 0 || h <= 0) throw std::runtime_error("png missing IHDR");
    if (depth != 8) throw std::runtime_error("only 8-bit pngs supported");
    if (interlace != 0) throw std::runtime_error("interlaced pngs not supported");
    int nchan;
    switch (color) {
        case 0: nchan = 1; break;
        case 2: nchan = 3; break;
        case 4: nchan = 2; break;
        case 6: nchan = 4; break;
        default: throw std::runtime_error("palette pngs not supported");
    }

    std::size_t stride = std::size_t(w) * nchan;
    std::vector<std::uint8_t> raw = zlib_inflate(idat.data(), idat.size(), (stride + 1) * h);

    // undo per-row filters in place
    std::vector<std::uint8_t> pix(stride * h);
    int bpp = nchan;
    for (int y = 0; y < h; ++y) {
        int filter = raw[std::size_t(y) * (stride + 1)];
        const std::uint8_t* src = &raw[std::size_t(y) * (stride + 1) + 1];
        std::uint8_t* dst = &pix[std::size_t(y) * stride];
        const std::uint8_t* up = y > 0 ? &pix[std::size_t(y - 1) * stride] : nullptr;
        for (std::size_t x = 0; x < stride; ++x) {
            int a = x >= std::size_t(bpp) ? dst[x - bpp] : 0;
            int b = up ? up[x] : 0;
            int c = (up && x >= std::size_t(bpp)) ? up[x - bpp] : 0;
            int v = src[x];
            switch (filter) {
                case 0: break;
                case 1: v += a; break;
                case 2: v += b; break;
                case 3: v += (a + b) / 2; break;
                case 4: v += paeth(a, b, c); break;
                default: throw std::runtime_error("unknown png filter");
            }
            dst[x] = std::uint8_t(v);
        }
    }

    // gray -> 1 channel, everything else -> rgb with alpha dropped
    int out_c = (nchan == 1) ? 1 : 3;
    Image img(h, w, out_c);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const std::uint8_t* p = &pix[std::size_t(y) * stride + std::size_t(x) * nchan];
            if (nchan == 1) {
                img.at(y, x, 0) = float(p[0]) / 255.0f;
            } else if (nchan == 2) {
                for (int k = 0; k < 3; ++k) img.at(y, x, k) = float(p[0]) / 255.0f;
            } else {
                for (int k = 0; k < 3; ++k) img.at(y, x, k) = float(p[k]) / 255.0f;
            }
        }
    return img;
}

Image decode_ppm(const std::vector<std::uint8_t>& buf) {
    std::size_t pos = 0;
    auto token = [&]() -> std::string {
        while (pos < buf.size()) {
            if (std::isspace(buf[pos])) {
                ++pos;
            } else if (buf[pos] == '#') {
                while (pos < buf.size() && buf[pos] != '\n') ++pos;
            } else {
                break;
            }
        }
        std::string t;
        while (pos < buf.size() && !std::isspace(buf[pos])) t += char(buf[pos++]);
        return t;
    };
    std::string magic = token();
    if (magic != "P6" && magic != "P5") throw std::runtime_error("unsupported pnm flavor");
    int w = std::stoi(token());
    int h = std::stoi(token());
    int maxval = std::stoi(token());
    if (maxval != 255) throw std::runtime_error("only maxval 255 pnm supported");
    ++pos; // single whitespace after maxval
    int c = magic == "P6" ? 3 : 1;
    std::size_t need = std::size_t(h) * w * c;
    if (buf.size() - pos < need) throw std::runtime_error("truncated pnm");
    std::vector<std::uint8_t> bytes(buf.begin() + std::ptrdiff_t(pos),
                                    buf.begin() + std::ptrdiff_t(pos + need));
    return from_bytes(bytes, h, w, c);
}

} // namespace

Image read_image(const std::string& path) {
    std::vector<std::uint8_t> buf = read_file(path);
    static const std::uint8_t png_magic[4] = {0x89, 'P', 'N', 'G'};
    if (buf.size() >= 4 && std::memcmp(buf.data(), png_magic, 4) == 0) return decode_png(buf);
    if (buf.size() >= 2 && buf[0] == 'P' && (buf[1] == '5' || buf[1] == '6')) return decode_ppm(buf);
    throw std::runtime_error("unrecognized image format: " + path);
}

bool has_extension(const std::string& path, const std::string& ext) {
    if (path.size() < ext.size()) return false;
    std::string tail = path.substr(path.size() - ext.size());
    std::transform(tail.begin(), tail.end(), tail.begin(),
                   [](unsigned char ch) { return char(std::tolower(ch)); });
    return tail == ext;
}

} // namespace wmforge
