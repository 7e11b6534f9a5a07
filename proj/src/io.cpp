#include "mvq/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace mvq {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string strip_comment(const std::string& line) {
    const auto pos = line.find('#');
    return trim(pos == std::string::npos ? line : line.substr(0, pos));
}

uint32_t parse_u32(const std::string& s, const std::string& what) {
    try {
        std::size_t used = 0;
        const unsigned long v = std::stoul(s, &used);
        if (used != s.size() || v > 0xFFFFFFFFul) throw std::invalid_argument(s);
        return uint32_t(v);
    } catch (const std::exception&) {
        fail(Errc::ParseError, "invalid " + what + ": '" + s + "'");
    }
}

std::pair<uint32_t, uint32_t> parse_nm(const std::string& s) {
    const auto colon = s.find(':');
    if (colon == std::string::npos) fail(Errc::ParseError, "expected N:M, got '" + s + "'");
    return {parse_u32(s.substr(0, colon), "N"), parse_u32(s.substr(colon + 1), "M")};
}

} // namespace

NamedTensor read_tensor_manifest(const std::filesystem::path& manifest) {
    std::ifstream in(manifest);
    if (!in) fail(Errc::IoError, "cannot open manifest " + manifest.string());

    NamedTensor t;
    TensorShape shape;
    std::filesystem::path blob = manifest;
    blob.replace_extension(".bin");
    bool have_shape = false;

    std::string line;
    while (std::getline(in, line)) {
        line = strip_comment(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            fail(Errc::ParseError, "manifest line is not key=value: '" + line + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key == "name") {
            t.name = value;
        } else if (key == "dtype") {
            if (value != "f32") fail(Errc::ParseError, "unsupported dtype '" + value + "'");
        } else if (key == "shape") {
            std::stringstream ss(value);
            std::string part;
            uint32_t dims[4];
            for (int i = 0; i < 4; ++i) {
                if (!std::getline(ss, part, ','))
                    fail(Errc::ParseError, "shape needs 4 comma-separated dims");
                dims[i] = parse_u32(trim(part), "shape dim");
            }
            if (std::getline(ss, part, ',')) fail(Errc::ParseError, "shape has extra dims");
            shape = TensorShape{dims[0], dims[1], dims[2], dims[3]};
            have_shape = true;
        } else if (key == "data") {
            blob = manifest.parent_path() / value;
        } else {
            fail(Errc::ParseError, "unknown manifest key '" + key + "'");
        }
    }
    if (!have_shape) fail(Errc::ParseError, "manifest missing shape");
    if (t.name.empty()) t.name = manifest.stem().string();

    const auto bytes = read_file_bytes(blob);
    if (bytes.size() != shape.count() * 4)
        fail(Errc::IoError, "blob " + blob.string() + " has " + std::to_string(bytes.size()) +
                                " bytes, expected " + std::to_string(shape.count() * 4));

    std::vector<double> data(shape.count());
    for (std::size_t i = 0; i < data.size(); ++i) {
        uint32_t bits = 0;
        for (int b = 0; b < 4; ++b) bits |= uint32_t(bytes[i * 4 + b]) << (8 * b);
        float f;
        std::memcpy(&f, &bits, 4);
        data[i] = double(f);
    }
    t.tensor = make_weight_tensor(shape, std::move(data));
    return t;
}

void write_tensor_manifest(const std::filesystem::path& manifest, const NamedTensor& t) {
    std::filesystem::path blob = manifest;
    blob.replace_extension(".bin");

    std::ofstream out(manifest);
    if (!out) fail(Errc::IoError, "cannot write manifest " + manifest.string());
    out << "name=" << t.name << "\n";
    out << "dtype=f32\n";
    out << "shape=" << t.tensor.shape.cout << "," << t.tensor.shape.cin << ","
        << t.tensor.shape.kh << "," << t.tensor.shape.kw << "\n";
    out << "data=" << blob.filename().string() << "\n";

    std::vector<uint8_t> bytes(t.tensor.data.size() * 4);
    for (std::size_t i = 0; i < t.tensor.data.size(); ++i) {
        const float f = float(t.tensor.data[i]);
        uint32_t bits;
        std::memcpy(&bits, &f, 4);
        for (int b = 0; b < 4; ++b) bytes[i * 4 + b] = uint8_t(bits >> (8 * b));
    }
    write_file_bytes(blob, bytes);
}

std::vector<LayerSpec> read_layer_table(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(Errc::IoError, "cannot open layer table " + path.string());

    std::vector<LayerSpec> layers;
    std::string line;
    while (std::getline(in, line)) {
        line = strip_comment(line);
        if (line.empty()) continue;
        std::stringstream ss(line);
        LayerSpec l;
        std::string c0, c1, c2, c3, c4, c5;
        if (!(ss >> l.name >> c0 >> c1 >> c2 >> c3 >> c4 >> c5))
            fail(Errc::ParseError, "layer line needs 'name Cout Cin Kh Kw OH OW': '" + line + "'");
        std::string extra;
        if (ss >> extra) fail(Errc::ParseError, "trailing tokens on layer line: '" + line + "'");
        l.cout = parse_u32(c0, "Cout");
        l.cin = parse_u32(c1, "Cin");
        l.kh = parse_u32(c2, "Kh");
        l.kw = parse_u32(c3, "Kw");
        l.oh = parse_u32(c4, "OH");
        l.ow = parse_u32(c5, "OW");
        layers.push_back(std::move(l));
    }
    return layers;
}

std::vector<LayerJob> read_compress_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(Errc::IoError, "cannot open layer config " + path.string());

    std::vector<LayerJob> jobs;
    std::string line;
    while (std::getline(in, line)) {
        line = strip_comment(line);
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string token;
        ss >> token;
        LayerJob job;
        job.manifest = path.parent_path() / token;
        while (ss >> token) {
            if (token == "exclude") {
                job.include = false;
                continue;
            }
            const auto eq = token.find('=');
            if (eq == std::string::npos)
                fail(Errc::ParseError, "expected key=value or 'exclude', got '" + token + "'");
            const std::string key = token.substr(0, eq);
            const std::string value = token.substr(eq + 1);
            if (key == "d") job.d = parse_u32(value, "d");
            else if (key == "k") job.k = parse_u32(value, "k");
            else if (key == "qc") job.qc = parse_u32(value, "qc");
            else if (key == "nm") job.nm = parse_nm(value);
            else fail(Errc::ParseError, "unknown layer option '" + key + "'");
        }
        jobs.push_back(std::move(job));
    }
    return jobs;
}

std::vector<uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(Errc::IoError, "cannot open " + path.string());
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                               std::istreambuf_iterator<char>());
    return bytes;
}

void write_file_bytes(const std::filesystem::path& path, std::span<const uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(Errc::IoError, "cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    if (!out) fail(Errc::IoError, "short write to " + path.string());
}

} // namespace mvq
