#include <fstream>

#include "mtlpose/binary_io.hpp"
#include "mtlpose/net.hpp"

namespace mtlpose {

namespace {
constexpr std::uint16_t kWeightsVersion = 1;
}

std::string_view to_string(Architecture arch) {
    switch (arch) {
        case Architecture::baseline: return "baseline";
        case Architecture::deeper: return "deeper";
        case Architecture::custom: return "custom";
    }
    return "baseline";
}

Architecture architecture_from_string(std::string_view name) {
    if (name == "baseline") return Architecture::baseline;
    if (name == "deeper") return Architecture::deeper;
    throw ConfigError("unknown architecture '" + std::string(name) + "'");
}

void NetConfig::validate() const {
    if (descriptor_dim < 2) throw ConfigError("descriptor_dim must be >= 2");
    if (input_size < 1) throw ConfigError("input_size must be >= 1");
    if (width_divisor < 1) throw ConfigError("width_divisor must be >= 1");
}

NetConfig desk_preset(std::uint64_t seed) {
    NetConfig cfg;
    cfg.input_size = 32;
    cfg.width_divisor = 2;
    cfg.seed = seed;
    return cfg;
}

std::vector<LayerDesc> trunk_layers(const NetConfig& cfg) {
    const int div = cfg.width_divisor;
    const int wide = std::max(1, 16 / div);
    const int narrow = std::max(1, (7 + div - 1) / div);
    const int hidden = 256;
    using L = LayerDesc;
    switch (cfg.architecture) {
        case Architecture::baseline:
            return {L::conv(wide, 8), L::maxpool(), L::relu(), L::conv(narrow, 5), L::maxpool(), L::relu(),
                    L::dense(hidden),  L::relu(),    L::dense(cfg.descriptor_dim)};
        case Architecture::deeper:
            return {L::conv(wide, 8),      L::relu(), L::conv(wide, 3, 2),   L::relu(),
                    L::conv(narrow, 5),    L::relu(), L::conv(narrow, 3, 2), L::relu(),
                    L::dense(hidden),      L::relu(), L::dense(cfg.descriptor_dim)};
        case Architecture::custom:
            break;
    }
    throw ConfigError("custom architectures need an explicit layer list");
}

void save_weights(const Network<float>& net, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw ConfigError("cannot write " + path.string());
    const NetConfig& c = net.config();
    io::write_magic(os, "PMW1");
    io::write_le<std::uint16_t>(os, kWeightsVersion);
    io::write_le<std::uint8_t>(os, static_cast<std::uint8_t>(c.architecture));
    io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(c.input_size));
    io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(c.descriptor_dim));
    io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(c.width_divisor));
    io::write_le<std::uint64_t>(os, c.seed);
    io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(net.trunk().size()));
    for (std::size_t i = 0; i <= net.trunk().size(); ++i) {
        const LayerDesc l = i < net.trunk().size() ? net.trunk()[i] : LayerDesc::dense(4);
        io::write_le<std::uint8_t>(os, static_cast<std::uint8_t>(l.kind));
        io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(l.out_channels));
        io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(l.kernel));
        io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(l.stride));
        io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(l.units));
        io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(net.layer_params(i).second));
    }
    const auto& p = net.parameters();
    os.write(reinterpret_cast<const char*>(p.data()), static_cast<std::streamsize>(p.size() * sizeof(float)));
    if (!os) throw ConfigError("write failed for " + path.string());
}

Network<float> load_weights(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("cannot open " + path.string());
    io::expect_magic(is, "PMW1");
    const auto version = io::read_le<std::uint16_t>(is);
    if (version != kWeightsVersion) throw FormatError("unsupported weights version " + std::to_string(version));
    NetConfig c;
    const auto arch = io::read_le<std::uint8_t>(is);
    if (arch > 2) throw FormatError("invalid architecture tag");
    c.architecture = static_cast<Architecture>(arch);
    c.input_size = static_cast<int>(io::read_le<std::uint32_t>(is));
    c.descriptor_dim = static_cast<int>(io::read_le<std::uint32_t>(is));
    c.width_divisor = static_cast<int>(io::read_le<std::uint32_t>(is));
    c.seed = io::read_le<std::uint64_t>(is);
    const auto layers = io::read_le<std::uint32_t>(is);
    if (layers > 1024) throw FormatError("implausible layer count");
    std::vector<LayerDesc> trunk;
    std::vector<std::uint32_t> counts;
    for (std::uint32_t i = 0; i <= layers; ++i) {
        LayerDesc l;
        const auto kind = io::read_le<std::uint8_t>(is);
        if (kind > 3) throw FormatError("invalid layer kind");
        l.kind = static_cast<LayerKind>(kind);
        l.out_channels = static_cast<int>(io::read_le<std::uint32_t>(is));
        l.kernel = static_cast<int>(io::read_le<std::uint32_t>(is));
        l.stride = static_cast<int>(io::read_le<std::uint32_t>(is));
        l.units = static_cast<int>(io::read_le<std::uint32_t>(is));
        counts.push_back(io::read_le<std::uint32_t>(is));
        if (i < layers) trunk.push_back(l);
    }
    if (c.architecture != Architecture::custom) {
        std::vector<LayerDesc> expected;
        try {
            expected = trunk_layers(c);
        } catch (const ConfigError& e) {
            throw FormatError(std::string("inconsistent weights header: ") + e.what());
        }
        if (expected != trunk) throw FormatError("layer list does not match the stored architecture");
    }
    Network<float> net = [&] {
        try {
            return Network<float>(c, trunk);
        } catch (const ConfigError& e) {
            throw FormatError(std::string("inconsistent weights header: ") + e.what());
        }
    }();
    for (std::size_t i = 0; i < counts.size(); ++i)
        if (static_cast<Eigen::Index>(counts[i]) != net.layer_params(i).second)
            throw FormatError("layer " + std::to_string(i) + " parameter count mismatch");
    auto& p = net.mutable_parameters();
    io::read_bytes(is, reinterpret_cast<char*>(p.data()), static_cast<std::size_t>(p.size()) * sizeof(float));
    io::expect_eof(is);
    return net;
}

Network<float> load_weights(const std::filesystem::path& path, const NetConfig& expected) {
    Network<float> net = load_weights(path);
    const NetConfig& c = net.config();
    if (c.descriptor_dim != expected.descriptor_dim)
        throw ConfigError("weights have descriptor_dim " + std::to_string(c.descriptor_dim) + ", expected " +
                          std::to_string(expected.descriptor_dim));
    if (c.input_size != expected.input_size)
        throw ConfigError("weights have input size " + std::to_string(c.input_size) + ", expected " +
                          std::to_string(expected.input_size));
    if (c.architecture != expected.architecture || c.width_divisor != expected.width_divisor)
        throw ConfigError("weights architecture differs from the expected configuration");
    return net;
}

}  // namespace mtlpose
