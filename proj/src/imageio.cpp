#include "dymapia/imageio.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>

namespace dymapia {

namespace {

std::vector<uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open file: " + path);
    std::vector<uint8_t> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw io_error("read failed: " + path);
    return data;
}

void write_file(const std::string& path, const std::vector<uint8_t>& data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot open file for writing: " + path);
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    if (!out) throw io_error("write failed: " + path);
}

// ---------------------------------------------------------------- CRC/adler

uint32_t crc32(const uint8_t* data, size_t n, uint32_t crc = 0) {
    static std::array<uint32_t, 256> table = [] {
        std::array<uint32_t, 256> t{};
        for (uint32_t i = 0; i < 256; ++i) {
            uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xedb88320U ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    crc ^= 0xffffffffU;
    for (size_t i = 0; i < n; ++i) crc = table[(crc ^ data[i]) & 0xff] ^ (crc >> 8);
    return crc ^ 0xffffffffU;
}

uint32_t adler32(const uint8_t* data, size_t n) {
    uint32_t a = 1, b = 0;
    for (size_t i = 0; i < n; ++i) {
        a = (a + data[i]) % 65521;
        b = (b + a) % 65521;
    }
    return (b << 16) | a;
}

// ------------------------------------------------------------------ inflate

// RFC 1951 decoder, enough for any zlib stream found inside a PNG.
class BitReader {
public:
    BitReader(const uint8_t* data, size_t n) : data_(data), size_(n) {}

    uint32_t bits(int count) {
        uint32_t v = 0;
        for (int i = 0; i < count; ++i) v |= static_cast<uint32_t>(bit()) << i;
        return v;
    }

    int bit() {
        if (pos_ >= size_) throw io_error("png: truncated deflate stream");
        int b = (data_[pos_] >> nbit_) & 1;
        if (++nbit_ == 8) { nbit_ = 0; ++pos_; }
        return b;
    }

    void align() {
        if (nbit_ != 0) { nbit_ = 0; ++pos_; }
    }

    const uint8_t* raw(size_t n) {
        if (pos_ + n > size_) throw io_error("png: truncated stored block");
        const uint8_t* p = data_ + pos_;
        pos_ += n;
        return p;
    }

private:
    const uint8_t* data_;
    size_t size_;
    size_t pos_ = 0;
    int nbit_ = 0;
};

struct Huffman {
    // Canonical code tables: counts per bit length and symbols in code order.
    std::array<uint16_t, 16> count{};
    std::vector<uint16_t> symbol;

    void build(const std::vector<uint8_t>& lengths) {
        count.fill(0);
        for (uint8_t len : lengths)
            if (len) ++count[len];
        std::array<uint16_t, 16> offs{};
        for (int len = 1; len < 15; ++len) offs[len + 1] = offs[len] + count[len];
        symbol.assign(offs[15] + count[15], 0);
        for (size_t sym = 0; sym < lengths.size(); ++sym)
            if (lengths[sym]) symbol[offs[lengths[sym]]++] = static_cast<uint16_t>(sym);
    }

    int decode(BitReader& br) const {
        int code = 0, first = 0, index = 0;
        for (int len = 1; len <= 15; ++len) {
            code |= br.bit();
            int cnt = count[len];
            if (code - first < cnt) return symbol[index + code - first];
            index += cnt;
            first = (first + cnt) << 1;
            code <<= 1;
        }
        throw io_error("png: invalid huffman code");
    }
};

std::vector<uint8_t> inflate(const uint8_t* data, size_t n) {
    static const uint16_t len_base[29] = {3, 4, 5, 6, 7, 8, 9, 10, 11, 13, 15, 17, 19, 23, 27,
                                          31, 35, 43, 51, 59, 67, 83, 99, 115, 131, 163, 195, 227, 258};
    static const uint8_t len_extra[29] = {0, 0, 0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2,
                                          2, 3, 3, 3, 3, 4, 4, 4, 4, 5, 5, 5, 5, 0};
    static const uint16_t dist_base[30] = {1, 2, 3, 4, 5, 7, 9, 13, 17, 25, 33, 49, 65, 97, 129,
                                           193, 257, 385, 513, 769, 1025, 1537, 2049, 3073, 4097,
                                           6145, 8193, 12289, 16385, 24577};
    static const uint8_t dist_extra[30] = {0, 0, 0, 0, 1, 1, 2, 2, 3, 3, 4, 4, 5, 5, 6,
                                           6, 7, 7, 8, 8, 9, 9, 10, 10, 11, 11, 12, 12, 13, 13};

    BitReader br(data, n);
    std::vector<uint8_t> out;
    bool final_block = false;
    while (!final_block) {
        final_block = br.bit() != 0;
        int type = static_cast<int>(br.bits(2));
        if (type == 0) {
            br.align();
            const uint8_t* hdr = br.raw(4);
            uint16_t len = static_cast<uint16_t>(hdr[0] | (hdr[1] << 8));
            uint16_t nlen = static_cast<uint16_t>(hdr[2] | (hdr[3] << 8));
            if (static_cast<uint16_t>(~len) != nlen) throw io_error("png: stored block length mismatch");
            const uint8_t* p = br.raw(len);
            out.insert(out.end(), p, p + len);
            continue;
        }
        Huffman lit, dist;
        if (type == 1) {
            std::vector<uint8_t> ll(288), dl(30, 5);
            for (int i = 0; i < 288; ++i)
                ll[i] = i < 144 ? 8 : i < 256 ? 9 : i < 280 ? 7 : 8;
            lit.build(ll);
            dist.build(dl);
        } else if (type == 2) {
            int hlit = static_cast<int>(br.bits(5)) + 257;
            int hdist = static_cast<int>(br.bits(5)) + 1;
            int hclen = static_cast<int>(br.bits(4)) + 4;
            static const int order[19] = {16, 17, 18, 0, 8, 7, 9, 6, 10, 5, 11, 4, 12, 3, 13, 2, 14, 1, 15};
            std::vector<uint8_t> clen(19, 0);
            for (int i = 0; i < hclen; ++i) clen[order[i]] = static_cast<uint8_t>(br.bits(3));
            Huffman cl;
            cl.build(clen);
            std::vector<uint8_t> lengths;
            lengths.reserve(hlit + hdist);
            while (static_cast<int>(lengths.size()) < hlit + hdist) {
                int sym = cl.decode(br);
                if (sym < 16) {
                    lengths.push_back(static_cast<uint8_t>(sym));
                } else if (sym == 16) {
                    if (lengths.empty()) throw io_error("png: bad code-length repeat");
                    int rep = 3 + static_cast<int>(br.bits(2));
                    lengths.insert(lengths.end(), rep, lengths.back());
                } else if (sym == 17) {
                    int rep = 3 + static_cast<int>(br.bits(3));
                    lengths.insert(lengths.end(), rep, 0);
                } else {
                    int rep = 11 + static_cast<int>(br.bits(7));
                    lengths.insert(lengths.end(), rep, 0);
                }
            }
            lit.build(std::vector<uint8_t>(lengths.begin(), lengths.begin() + hlit));
            dist.build(std::vector<uint8_t>(lengths.begin() + hlit, lengths.end()));
        } else {
            throw io_error("png: invalid deflate block type");
        }
        for (;;) {
            int sym = lit.decode(br);
            if (sym < 256) {
                out.push_back(static_cast<uint8_t>(sym));
            } else if (sym == 256) {
                break;
            } else {
                sym -= 257;
                if (sym >= 29) throw io_error("png: invalid length symbol");
                size_t length = len_base[sym] + br.bits(len_extra[sym]);
                int dsym = dist.decode(br);
                if (dsym >= 30) throw io_error("png: invalid distance symbol");
                size_t distance = dist_base[dsym] + br.bits(dist_extra[dsym]);
                if (distance > out.size()) throw io_error("png: distance beyond output");
                size_t start = out.size() - distance;
                for (size_t i = 0; i < length; ++i) out.push_back(out[start + i]);
            }
        }
    }
    return out;
}

// --------------------------------------------------------------- PNG reader

uint32_t be32(const uint8_t* p) {
    return (static_cast<uint32_t>(p[0]) << 24) | (static_cast<uint32_t>(p[1]) << 16) |
           (static_cast<uint32_t>(p[2]) << 8) | p[3];
}

int paeth(int a, int b, int c) {
    int p = a + b - c;
    int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return a;
    if (pb <= pc) return b;
    return c;
}

ImageU8 read_png(const std::vector<uint8_t>& file, const std::string& path) {
    static const uint8_t sig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
    if (file.size() < 8 || std::memcmp(file.data(), sig, 8) != 0)
        throw io_error("not a png file: " + path);

    uint32_t width = 0, height = 0;
    int bit_depth = 0, color_type = 0, interlace = 0;
    std::vector<uint8_t> idat;
    std::vector<std::array<uint8_t, 3>> palette;

    size_t pos = 8;
    bool seen_iend = false;
    while (pos + 8 <= file.size() && !seen_iend) {
        uint32_t len = be32(&file[pos]);
        if (pos + 12 + len > file.size()) throw io_error("png: truncated chunk in " + path);
        std::string type(reinterpret_cast<const char*>(&file[pos + 4]), 4);
        const uint8_t* payload = &file[pos + 8];
        if (type == "IHDR") {
            if (len != 13) throw io_error("png: bad IHDR in " + path);
            width = be32(payload);
            height = be32(payload + 4);
            bit_depth = payload[8];
            color_type = payload[9];
            interlace = payload[12];
        } else if (type == "PLTE") {
            for (uint32_t i = 0; i + 2 < len; i += 3)
                palette.push_back({payload[i], payload[i + 1], payload[i + 2]});
        } else if (type == "IDAT") {
            idat.insert(idat.end(), payload, payload + len);
        } else if (type == "IEND") {
            seen_iend = true;
        }
        pos += 12 + len;
    }
    if (width == 0 || height == 0) throw io_error("png: missing IHDR in " + path);
    if (bit_depth != 8) throw io_error("png: only 8-bit depth supported: " + path);
    if (interlace != 0) throw io_error("png: interlaced images not supported: " + path);
    int src_channels;
    switch (color_type) {
        case 0: src_channels = 1; break;
        case 2: src_channels = 3; break;
        case 3: src_channels = 1; break;
        case 6: src_channels = 4; break;
        default: throw io_error("png: unsupported color type in " + path);
    }
    if (idat.size() < 3) throw io_error("png: missing image data in " + path);

    // zlib wrapper: 2-byte header, deflate payload, adler trailer.
    std::vector<uint8_t> raw = inflate(idat.data() + 2, idat.size() - 2 - 4);

    const size_t stride = static_cast<size_t>(width) * src_channels;
    if (raw.size() != (stride + 1) * height) throw io_error("png: decoded size mismatch in " + path);

    // Undo per-scanline filters in place.
    std::vector<uint8_t> img(stride * height);
    const int bpp = src_channels;
    for (uint32_t y = 0; y < height; ++y) {
        uint8_t filter = raw[(stride + 1) * y];
        const uint8_t* src = &raw[(stride + 1) * y + 1];
        uint8_t* dst = &img[stride * y];
        const uint8_t* prev = y ? &img[stride * (y - 1)] : nullptr;
        for (size_t x = 0; x < stride; ++x) {
            int a = x >= static_cast<size_t>(bpp) ? dst[x - bpp] : 0;
            int b = prev ? prev[x] : 0;
            int c = (prev && x >= static_cast<size_t>(bpp)) ? prev[x - bpp] : 0;
            int v = src[x];
            switch (filter) {
                case 0: break;
                case 1: v += a; break;
                case 2: v += b; break;
                case 3: v += (a + b) / 2; break;
                case 4: v += paeth(a, b, c); break;
                default: throw io_error("png: unknown filter in " + path);
            }
            dst[x] = static_cast<uint8_t>(v & 0xff);
        }
    }

    // Collapse to gray or RGB.
    int out_channels = (color_type == 0) ? 1 : 3;
    ImageU8 out(static_cast<int>(height), static_cast<int>(width), out_channels);
    for (uint32_t y = 0; y < height; ++y) {
        for (uint32_t x = 0; x < width; ++x) {
            const uint8_t* px = &img[stride * y + static_cast<size_t>(x) * src_channels];
            uint8_t* o = &out.at(static_cast<int>(y), static_cast<int>(x), 0);
            if (color_type == 0) {
                o[0] = px[0];
            } else if (color_type == 3) {
                if (px[0] >= palette.size()) throw io_error("png: palette index out of range in " + path);
                const auto& p = palette[px[0]];
                o[0] = p[0]; o[1] = p[1]; o[2] = p[2];
            } else {
                o[0] = px[0]; o[1] = px[1]; o[2] = px[2];
            }
        }
    }
    return out;
}

// --------------------------------------------------------------- PNG writer

void push_be32(std::vector<uint8_t>& v, uint32_t x) {
    v.push_back(static_cast<uint8_t>(x >> 24));
    v.push_back(static_cast<uint8_t>(x >> 16));
    v.push_back(static_cast<uint8_t>(x >> 8));
    v.push_back(static_cast<uint8_t>(x));
}

void push_chunk(std::vector<uint8_t>& file, const char* type, const std::vector<uint8_t>& payload) {
    push_be32(file, static_cast<uint32_t>(payload.size()));
    size_t crc_start = file.size();
    file.insert(file.end(), type, type + 4);
    file.insert(file.end(), payload.begin(), payload.end());
    push_be32(file, crc32(&file[crc_start], file.size() - crc_start));
}

// --------------------------------------------------------------- PGM / PPM

struct PnmHeader {
    int magic = 0;
    int width = 0, height = 0, maxval = 0;
    size_t data_offset = 0;
};

int pnm_next_int(const std::vector<uint8_t>& f, size_t& pos) {
    while (pos < f.size()) {
        if (f[pos] == '#') {
            while (pos < f.size() && f[pos] != '\n') ++pos;
        } else if (std::isspace(f[pos])) {
            ++pos;
        } else {
            break;
        }
    }
    if (pos >= f.size() || !std::isdigit(f[pos])) throw io_error("pnm: malformed header");
    int v = 0;
    while (pos < f.size() && std::isdigit(f[pos])) v = v * 10 + (f[pos++] - '0');
    return v;
}

PnmHeader parse_pnm_header(const std::vector<uint8_t>& f, const std::string& path) {
    if (f.size() < 2 || f[0] != 'P') throw io_error("not a pnm file: " + path);
    PnmHeader h;
    h.magic = f[1] - '0';
    size_t pos = 2;
    h.width = pnm_next_int(f, pos);
    h.height = pnm_next_int(f, pos);
    h.maxval = pnm_next_int(f, pos);
    ++pos;  // single whitespace after maxval
    h.data_offset = pos;
    if (h.width <= 0 || h.height <= 0) throw io_error("pnm: bad dimensions in " + path);
    if (h.maxval != 255) throw io_error("pnm: only maxval 255 supported: " + path);
    return h;
}

ImageU8 read_pnm(const std::vector<uint8_t>& f, const std::string& path) {
    PnmHeader h = parse_pnm_header(f, path);
    int channels = (h.magic == 3 || h.magic == 6) ? 3 : 1;
    ImageU8 out(h.height, h.width, channels);
    size_t n = out.pixels.size();
    if (h.magic == 5 || h.magic == 6) {
        if (f.size() < h.data_offset + n) throw io_error("pnm: truncated data in " + path);
        std::copy(f.begin() + static_cast<long>(h.data_offset),
                  f.begin() + static_cast<long>(h.data_offset + n), out.pixels.begin());
    } else if (h.magic == 2 || h.magic == 3) {
        size_t pos = h.data_offset - 1;
        for (size_t i = 0; i < n; ++i) {
            int v = pnm_next_int(f, pos);
            if (v < 0 || v > 255) throw io_error("pnm: sample out of range in " + path);
            out.pixels[i] = static_cast<uint8_t>(v);
        }
    } else {
        throw io_error("pnm: unsupported format P" + std::to_string(h.magic) + ": " + path);
    }
    return out;
}

bool has_suffix(const std::string& s, const std::string& suf) {
    return s.size() >= suf.size() && s.compare(s.size() - suf.size(), suf.size(), suf) == 0;
}

}  // namespace

ImageU8 read_image(const std::string& path) {
    std::vector<uint8_t> file = read_file(path);
    if (file.size() >= 8 && file[0] == 137 && file[1] == 'P') return read_png(file, path);
    if (file.size() >= 2 && file[0] == 'P') return read_pnm(file, path);
    throw io_error("unrecognized image format: " + path);
}

void write_png(const std::string& path, const ImageU8& img) {
    if (img.channels != 1 && img.channels != 3)
        throw invalid_input("write_png: only 1 or 3 channels supported");
    std::vector<uint8_t> file = {137, 80, 78, 71, 13, 10, 26, 10};

    std::vector<uint8_t> ihdr;
    push_be32(ihdr, static_cast<uint32_t>(img.width));
    push_be32(ihdr, static_cast<uint32_t>(img.height));
    ihdr.push_back(8);                                  // bit depth
    ihdr.push_back(img.channels == 1 ? 0 : 2);          // gray / RGB
    ihdr.push_back(0); ihdr.push_back(0); ihdr.push_back(0);
    push_chunk(file, "IHDR", ihdr);

    // Raw scanlines, filter 0 everywhere.
    const size_t stride = static_cast<size_t>(img.width) * img.channels;
    std::vector<uint8_t> raw;
    raw.reserve((stride + 1) * img.height);
    for (int y = 0; y < img.height; ++y) {
        raw.push_back(0);
        const uint8_t* row = &img.pixels[stride * y];
        raw.insert(raw.end(), row, row + stride);
    }

    // zlib stream with stored deflate blocks.
    std::vector<uint8_t> z = {0x78, 0x01};
    size_t off = 0;
    while (off < raw.size() || raw.empty()) {
        size_t chunk = std::min<size_t>(65535, raw.size() - off);
        bool last = off + chunk == raw.size();
        z.push_back(last ? 1 : 0);
        z.push_back(static_cast<uint8_t>(chunk & 0xff));
        z.push_back(static_cast<uint8_t>(chunk >> 8));
        z.push_back(static_cast<uint8_t>(~chunk & 0xff));
        z.push_back(static_cast<uint8_t>((~chunk >> 8) & 0xff));
        z.insert(z.end(), raw.begin() + static_cast<long>(off), raw.begin() + static_cast<long>(off + chunk));
        off += chunk;
        if (last) break;
    }
    push_be32(z, adler32(raw.data(), raw.size()));
    push_chunk(file, "IDAT", z);
    push_chunk(file, "IEND", {});
    write_file(path, file);
}

void write_pgm(const std::string& path, const ImageU8& img) {
    if (img.channels != 1) throw invalid_input("write_pgm: gray images only");
    std::string header = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
    std::vector<uint8_t> file(header.begin(), header.end());
    file.insert(file.end(), img.pixels.begin(), img.pixels.end());
    write_file(path, file);
}

void write_image(const std::string& path, const ImageU8& img) {
    if (has_suffix(path, ".pgm")) {
        write_pgm(path, img);
    } else if (has_suffix(path, ".png")) {
        write_png(path, img);
    } else {
        throw invalid_input("write_image: unsupported extension: " + path);
    }
}

GrayFrame to_gray_frame(const ImageU8& img, int t) {
    GrayFrame out(img.height, img.width, 0.0, t);
    const size_t n = static_cast<size_t>(img.height) * img.width;
    if (img.channels == 1) {
        for (size_t i = 0; i < n; ++i) out.data[i] = img.pixels[i] / 255.0;
    } else {
        for (size_t i = 0; i < n; ++i) {
            const uint8_t* px = &img.pixels[i * 3];
            out.data[i] = (0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2]) / 255.0;
        }
    }
    return out;
}

ImageU8 to_image(const GrayFrame& frame) {
    ImageU8 out(frame.height, frame.width, 1);
    for (size_t i = 0; i < frame.size(); ++i) {
        double v = std::clamp(frame.data[i], 0.0, 1.0);
        out.pixels[i] = static_cast<uint8_t>(std::lround(v * 255.0));
    }
    return out;
}

ImageU8 mask_to_image(const BinaryMask& mask) {
    ImageU8 out(mask.height, mask.width, 1);
    for (size_t i = 0; i < mask.size(); ++i) out.pixels[i] = mask.bits[i] ? 255 : 0;
    return out;
}

BinaryMask image_to_mask(const ImageU8& img) {
    BinaryMask out(img.height, img.width, 0);
    const size_t n = out.size();
    for (size_t i = 0; i < n; ++i) {
        // RGB mask files count as set where the luma-ish mean is bright.
        int v = 0;
        for (int c = 0; c < img.channels; ++c) v += img.pixels[i * img.channels + c];
        out.bits[i] = (v / img.channels) >= 128 ? 1 : 0;
    }
    return out;
}

ImageU8 overlay(const GrayFrame& frame, const BinaryMask& mask) {
    if (!mask.same_shape(frame)) throw invalid_input("overlay: dimension mismatch");
    ImageU8 out(frame.height, frame.width, 3);
    for (size_t i = 0; i < frame.size(); ++i) {
        double v = std::clamp(frame.data[i], 0.0, 1.0);
        uint8_t g = static_cast<uint8_t>(std::lround(v * 255.0));
        if (mask.bits[i]) {
            out.pixels[i * 3 + 0] = static_cast<uint8_t>(std::lround(0.5 * v * 255.0 + 127.0));
            out.pixels[i * 3 + 1] = static_cast<uint8_t>(std::lround(0.5 * v * 255.0));
            out.pixels[i * 3 + 2] = static_cast<uint8_t>(std::lround(0.5 * v * 255.0));
        } else {
            out.pixels[i * 3 + 0] = g;
            out.pixels[i * 3 + 1] = g;
            out.pixels[i * 3 + 2] = g;
        }
    }
    return out;
}

}  // namespace dymapia
