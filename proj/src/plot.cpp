#include "lagns/plot.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>

#include "lagns/errors.hpp"

namespace lagns {

namespace {

std::uint32_t crc32(const std::uint8_t* data, std::size_t len, std::uint32_t crc = 0xffffffffu) {
    static std::uint32_t table[256];
    static bool init = false;
    if (!init) {
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
            table[i] = c;
        }
        init = true;
    }
    for (std::size_t i = 0; i < len; ++i) crc = table[(crc ^ data[i]) & 0xff] ^ (crc >> 8);
    return crc;
}

void put_u32(std::vector<std::uint8_t>& v, std::uint32_t x) {
    v.push_back(static_cast<std::uint8_t>(x >> 24));
    v.push_back(static_cast<std::uint8_t>(x >> 16));
    v.push_back(static_cast<std::uint8_t>(x >> 8));
    v.push_back(static_cast<std::uint8_t>(x));
}

void write_chunk(std::ofstream& out, const char type[4], const std::vector<std::uint8_t>& payload) {
    std::vector<std::uint8_t> buf;
    put_u32(buf, static_cast<std::uint32_t>(payload.size()));
    buf.insert(buf.end(), type, type + 4);
    buf.insert(buf.end(), payload.begin(), payload.end());
    const std::uint32_t crc =
        ~crc32(buf.data() + 4, buf.size() - 4);
    put_u32(buf, crc);
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

/// RGB raster with filter-0 rows, emitted as stored (type 00) deflate blocks.
class Canvas {
  public:
    Canvas(int w, int h) : w_(w), h_(h), px_(static_cast<std::size_t>(w) * h * 3, 255) {}

    void set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
        if (x < 0 || y < 0 || x >= w_ || y >= h_) return;
        auto* p = &px_[(static_cast<std::size_t>(y) * w_ + x) * 3];
        p[0] = r;
        p[1] = g;
        p[2] = b;
    }

    void line(int x0, int y0, int x1, int y1, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
        const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
        const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
        int err = dx + dy;
        while (true) {
            set(x0, y0, r, g, b);
            if (x0 == x1 && y0 == y1) break;
            const int e2 = 2 * err;
            if (e2 >= dy) { err += dy; x0 += sx; }
            if (e2 <= dx) { err += dx; y0 += sy; }
        }
    }

    void save(const std::filesystem::path& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw ValidationError("cannot open " + path.string());
        static const std::uint8_t sig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
        out.write(reinterpret_cast<const char*>(sig), 8);

        std::vector<std::uint8_t> ihdr;
        put_u32(ihdr, static_cast<std::uint32_t>(w_));
        put_u32(ihdr, static_cast<std::uint32_t>(h_));
        ihdr.push_back(8);  // bit depth
        ihdr.push_back(2);  // RGB
        ihdr.push_back(0);
        ihdr.push_back(0);
        ihdr.push_back(0);
        write_chunk(out, "IHDR", ihdr);

        // raw scanlines with filter byte 0
        std::vector<std::uint8_t> raw;
        raw.reserve(static_cast<std::size_t>(h_) * (1 + 3 * w_));
        for (int y = 0; y < h_; ++y) {
            raw.push_back(0);
            const auto* row = &px_[static_cast<std::size_t>(y) * w_ * 3];
            raw.insert(raw.end(), row, row + 3 * w_);
        }

        std::vector<std::uint8_t> idat;
        idat.push_back(0x78); // zlib header, no compression preset
        idat.push_back(0x01);
        std::size_t off = 0;
        while (off < raw.size()) {
            const std::size_t chunk = std::min<std::size_t>(65535, raw.size() - off);
            idat.push_back(off + chunk == raw.size() ? 1 : 0); // BFINAL, stored block
            idat.push_back(static_cast<std::uint8_t>(chunk & 0xff));
            idat.push_back(static_cast<std::uint8_t>(chunk >> 8));
            idat.push_back(static_cast<std::uint8_t>(~chunk & 0xff));
            idat.push_back(static_cast<std::uint8_t>((~chunk >> 8) & 0xff));
            idat.insert(idat.end(), raw.begin() + off, raw.begin() + off + chunk);
            off += chunk;
        }
        // adler32 of the raw stream
        std::uint32_t a = 1, b = 0;
        for (std::uint8_t byte : raw) {
            a = (a + byte) % 65521;
            b = (b + a) % 65521;
        }
        put_u32(idat, (b << 16) | a);
        write_chunk(out, "IDAT", idat);
        write_chunk(out, "IEND", {});
    }

  private:
    int w_, h_;
    std::vector<std::uint8_t> px_;
};

const std::array<std::array<std::uint8_t, 3>, 6> kPalette{{{31, 119, 180},
                                                           {214, 39, 40},
                                                           {44, 160, 44},
                                                           {148, 103, 189},
                                                           {255, 127, 14},
                                                           {23, 190, 207}}};

} // namespace

void write_line_plot_png(const std::filesystem::path& path, const std::vector<PlotSeries>& series,
                         int width, int height, bool log_y) {
    Canvas cv(width, height);
    const int ml = 50, mr = 15, mt = 15, mb = 35;

    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
    double ymin = xmin, ymax = -xmin;
    for (const auto& s : series)
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            double yv = s.y[i];
            if (log_y) {
                if (yv <= 0) continue;
                yv = std::log10(yv);
            }
            xmin = std::min(xmin, s.x[i]);
            xmax = std::max(xmax, s.x[i]);
            ymin = std::min(ymin, yv);
            ymax = std::max(ymax, yv);
        }
    if (!std::isfinite(xmin) || !std::isfinite(ymin)) { xmin = 0; xmax = 1; ymin = 0; ymax = 1; }
    if (xmax <= xmin) xmax = xmin + 1;
    if (ymax <= ymin) ymax = ymin + 1;

    auto px = [&](double x) {
        return ml + static_cast<int>((x - xmin) / (xmax - xmin) * (width - ml - mr));
    };
    auto py = [&](double y) {
        if (log_y) y = std::log10(std::max(y, 1e-300));
        return height - mb - static_cast<int>((y - ymin) / (ymax - ymin) * (height - mt - mb));
    };

    // frame and gridlines
    cv.line(ml, mt, ml, height - mb, 0, 0, 0);
    cv.line(ml, height - mb, width - mr, height - mb, 0, 0, 0);
    for (int k = 1; k <= 4; ++k) {
        const int gy = mt + k * (height - mt - mb) / 5;
        for (int x = ml; x < width - mr; x += 4) cv.set(x, gy, 210, 210, 210);
    }

    for (std::size_t si = 0; si < series.size(); ++si) {
        const auto& c = kPalette[si % kPalette.size()];
        const auto& s = series[si];
        for (std::size_t i = 1; i < s.x.size(); ++i) {
            if (log_y && (s.y[i] <= 0 || s.y[i - 1] <= 0)) continue;
            cv.line(px(s.x[i - 1]), py(s.y[i - 1]), px(s.x[i]), py(s.y[i]), c[0], c[1], c[2]);
        }
    }
    cv.save(path);
}

void write_polygon_frames_png(const std::filesystem::path& path,
                              const std::vector<std::vector<std::array<double, 2>>>& frames,
                              double L, int size) {
    Canvas cv(size, size);
    auto px = [&](double v) { return static_cast<int>(v / L * (size - 1)); };
    for (std::size_t f = 0; f < frames.size(); ++f) {
        const auto& c = kPalette[f % kPalette.size()];
        const auto& poly = frames[f];
        for (std::size_t i = 0; i < poly.size(); ++i) {
            const auto& a = poly[i];
            const auto& b = poly[(i + 1) % poly.size()];
            // skip segments that wrap around the torus
            if (std::abs(a[0] - b[0]) > L / 2 || std::abs(a[1] - b[1]) > L / 2) continue;
            cv.line(px(a[0]), size - 1 - px(a[1]), px(b[0]), size - 1 - px(b[1]), c[0], c[1], c[2]);
        }
    }
    cv.save(path);
}

} // namespace lagns
