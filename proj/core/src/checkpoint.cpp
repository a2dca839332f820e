#include "metaood/checkpoint.hpp"

#include <algorithm>
#include <fstream>

#include "metaood/binary_io.hpp"
#include "metaood/error.hpp"

namespace metaood {

using namespace binary_io;

void write_checkpoint(std::ostream& out, const CommonParams& params) {
    const EncoderConfig& c = params.config;
    out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    write_u32(out, kCheckpointVersion);
    write_u32(out, static_cast<std::uint32_t>(c.input_dim));
    write_u32(out, static_cast<std::uint32_t>(c.latent_dim));
    write_u32(out, static_cast<std::uint32_t>(c.hidden_dims.size()));
    for (std::size_t h : c.hidden_dims) write_u32(out, static_cast<std::uint32_t>(h));
    write_f64(out, c.dropout_rate);
    const std::vector<double> flat = params.flatten();
    write_u64(out, flat.size() - 1);
    for (double v : flat) write_f64(out, v);
    if (!out) throw Error("checkpoint: write failed");
}

CommonParams read_checkpoint(std::istream& in) {
    char magic[8] = {};
    in.read(magic, sizeof(magic));
    if (in.gcount() != sizeof(magic) || !std::equal(magic, magic + 8, kCheckpointMagic)) {
        throw FormatError("checkpoint: bad magic");
    }
    const std::uint32_t version = read_u32(in, "version");
    if (version != kCheckpointVersion) {
        throw FormatError("checkpoint: unsupported version " + std::to_string(version));
    }
    EncoderConfig c;
    c.input_dim = read_u32(in, "input_dim");
    c.latent_dim = read_u32(in, "latent_dim");
    const std::uint32_t hidden = read_u32(in, "hidden count");
    if (hidden > 1024) throw FormatError("checkpoint: implausible hidden layer count");
    for (std::uint32_t i = 0; i < hidden; ++i) c.hidden_dims.push_back(read_u32(in, "hidden width"));
    c.dropout_rate = read_f64(in, "dropout_rate");
    c.validate();

    CommonParams p = init_params(c, 0);
    const std::uint64_t n = read_u64(in, "parameter count");
    if (n + 1 != p.parameter_count()) {
        throw FormatError("checkpoint: parameter count " + std::to_string(n) +
                          " does not match the encoder shape");
    }
    std::vector<double> flat(n + 1);
    for (double& v : flat) v = read_f64(in, "parameters");
    p.assign(flat);
    return p;
}

void save_checkpoint(const std::filesystem::path& path, const CommonParams& params) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("checkpoint: cannot open " + path.string() + " for writing");
    write_checkpoint(out, params);
}

CommonParams load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("checkpoint: cannot open " + path.string());
    return read_checkpoint(in);
}

}  // namespace metaood
