#include "sktomo/nn.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "sktomo/raw_io.hpp"

namespace sktomo {

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& why) {
    throw std::runtime_error("checkpoint '" + path + "': " + why);
}

std::string param_file_name(std::size_t index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "p%04zu.uskd", index);
    return buf;
}

}  // namespace

std::size_t prox_block_param_count(const ProxBlockSpec& spec) {
    const std::size_t k2 = std::size_t(spec.ksize) * spec.ksize;
    std::size_t n = 0;
    n += std::size_t(spec.hidden) * spec.in_channels * k2 + spec.hidden + 1;  // conv1 + slope
    n += std::size_t(spec.hidden) * spec.hidden * k2 + spec.hidden + 1;       // conv2 + slope
    n += std::size_t(spec.out_channels) * spec.hidden * k2 + spec.out_channels;  // conv3
    return n;
}

void save_checkpoint(const std::string& dir, const ParamStore<float>& params) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) fail(dir, "cannot create directory: " + ec.message());

    std::ostringstream manifest;
    manifest << "sktomo-checkpoint v1\n";
    manifest << "params " << params.count() << "\n";
    for (std::size_t i = 0; i < params.count(); ++i) {
        const ParamInfo& info = params.info[i];
        if (info.name.find_first_of(" \t\n") != std::string::npos)
            fail(dir, "parameter name contains whitespace: " + info.name);
        const std::string file = param_file_name(i);
        const std::string path = dir + "/" + file;
        RawMatrix m;
        m.rows = std::uint32_t(info.shape.c) * std::uint32_t(info.shape.h);
        m.cols = std::uint32_t(info.shape.w);
        m.data = params.values[i];
        write_raw(path, m);
        manifest << i << " " << info.name << " " << info.shape.c << " " << info.shape.h << " "
                 << info.shape.w << " " << hex64(fnv1a64_file(path)) << "\n";
    }
    const std::string manifest_path = dir + "/manifest.txt";
    std::ofstream out(manifest_path, std::ios::trunc);
    if (!out) fail(manifest_path, "cannot open for writing");
    out << manifest.str();
    if (!out.flush()) fail(manifest_path, "write failed");
}

ParamStore<float> load_checkpoint(const std::string& dir) {
    const std::string manifest_path = dir + "/manifest.txt";
    std::ifstream in(manifest_path);
    if (!in) fail(manifest_path, "cannot open for reading");
    std::string header;
    std::getline(in, header);
    if (header != "sktomo-checkpoint v1") fail(manifest_path, "bad header line");
    std::string word;
    std::size_t count = 0;
    if (!(in >> word >> count) || word != "params") fail(manifest_path, "bad params line");

    ParamStore<float> params;
    for (std::size_t i = 0; i < count; ++i) {
        std::size_t index = 0;
        std::string name;
        int c = 0, h = 0, w = 0;
        std::string checksum;
        if (!(in >> index >> name >> c >> h >> w >> checksum))
            fail(manifest_path, "truncated manifest entry " + std::to_string(i));
        if (index != i) fail(manifest_path, "out-of-order manifest entry " + std::to_string(i));
        const std::string path = dir + "/" + param_file_name(i);
        if (hex64(fnv1a64_file(path)) != checksum) fail(path, "checksum mismatch");
        RawMatrix m = read_raw(path);
        const TensorShape shape{c, h, w};
        if (m.data.size() != shape.size() || m.rows != std::uint32_t(c) * std::uint32_t(h) ||
            m.cols != std::uint32_t(w))
            fail(path, "payload shape disagrees with manifest");
        params.add(name, shape, std::move(m.data));
    }
    return params;
}

}  // namespace sktomo
