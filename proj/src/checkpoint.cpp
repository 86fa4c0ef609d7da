#include "wmforge/checkpoint.hpp"

#include <json.hpp>

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace wmforge {

namespace {

constexpr char kMagic[4] = {'W', 'M', 'F', 'G'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) throw std::runtime_error("truncated checkpoint");
    return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 |
           std::uint32_t(b[3]) << 24;
}

void put_f32_le(std::ostream& os, const float* v, std::size_t n) {
    // the build targets little-endian hosts; memcpy keeps this alias-safe
    for (std::size_t i = 0; i < n; ++i) {
        std::uint32_t u;
        std::memcpy(&u, &v[i], 4);
        put_u32(os, u);
    }
}

float get_f32_le(std::istream& is) {
    std::uint32_t u = get_u32(is);
    float f;
    std::memcpy(&f, &u, 4);
    return f;
}

} // namespace

void save_model(const PrefModel& m, const std::string& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open checkpoint for writing: " + path);
    os.write(kMagic, 4);
    put_u32(os, kVersion);

    nlohmann::json arch;
    arch["family"] = "prefnet";
    arch["width"] = m.width;
    arch["depth"] = m.depth;
    const std::string arch_str = arch.dump();
    put_u32(os, std::uint32_t(arch_str.size()));
    os.write(arch_str.data(), std::streamsize(arch_str.size()));

    put_u32(os, std::uint32_t(m.params.size()));
    for (std::size_t i = 0; i < m.params.size(); ++i) {
        const std::string& name = m.names[i];
        const Tensor& t = m.params[i];
        put_u32(os, std::uint32_t(name.size()));
        os.write(name.data(), std::streamsize(name.size()));
        put_u32(os, std::uint32_t(t.shape.size()));
        for (std::int64_t e : t.shape) put_u32(os, std::uint32_t(e));
        put_f32_le(os, t.data.data(), t.data.size());
    }
    if (!os) throw std::runtime_error("failed writing checkpoint: " + path);
}

PrefModel load_model(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("not a model checkpoint: " + path);
    const std::uint32_t version = get_u32(is);
    if (version != kVersion)
        throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));

    const std::uint32_t arch_len = get_u32(is);
    std::string arch_str(arch_len, '\0');
    if (!is.read(arch_str.data(), std::streamsize(arch_len)))
        throw std::runtime_error("truncated checkpoint");
    const auto arch = nlohmann::json::parse(arch_str);

    PrefModel m;
    m.width = arch.at("width").get<int>();
    m.depth = arch.at("depth").get<int>();

    const std::uint32_t count = get_u32(is);
    m.names.reserve(count);
    m.params.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t name_len = get_u32(is);
        std::string name(name_len, '\0');
        if (!is.read(name.data(), std::streamsize(name_len)))
            throw std::runtime_error("truncated checkpoint");
        const std::uint32_t rank = get_u32(is);
        std::vector<std::int64_t> shape(rank);
        for (auto& e : shape) e = std::int64_t(get_u32(is));
        Tensor t(shape);
        for (auto& v : t.data) v = get_f32_le(is);
        m.names.push_back(std::move(name));
        m.params.push_back(std::move(t));
    }

    // cheap structural check so a truncated or mismatched file fails loudly
    PrefModel ref = init_model(m.width, m.depth, 0);
    if (ref.names != m.names) throw std::runtime_error("checkpoint does not describe this architecture");
    for (std::size_t i = 0; i < ref.params.size(); ++i)
        if (!ref.params[i].same_shape(m.params[i]))
            throw std::runtime_error("checkpoint tensor shape mismatch at " + m.names[i]);
    return m;
}

void write_trace_csv(const std::vector<TraceRow>& trace, const std::string& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open trace file: " + path);
    os << "step,loss,rank_acc\n";
    char line[96];
    for (const auto& r : trace) {
        std::snprintf(line, sizeof(line), "%d,%.6f,%.4f\n", r.step, r.loss, r.rank_acc);
        os << line;
    }
}

} // namespace wmforge
