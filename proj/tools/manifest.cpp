#include "manifest.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <fstream>

#include "cogdiag/error.hpp"
#include "cogdiag/version.hpp"

namespace cogdiag::cli {

namespace fs = std::filesystem;

std::string sha256_hex(const fs::path& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw ParseError("cannot open " + path.string());

    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
    char buffer[1 << 16];
    while (file) {
        file.read(buffer, sizeof(buffer));
        EVP_DigestUpdate(ctx, buffer, static_cast<std::size_t>(file.gcount()));
    }
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int length = 0;
    EVP_DigestFinal_ex(ctx, digest, &length);
    EVP_MD_CTX_free(ctx);

    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * length);
    for (unsigned int i = 0; i < length; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xF];
    }
    return out;
}

fs::path make_run_directory(const fs::path& parent, const std::string& command,
                            std::uint64_t seed, bool force) {
    const fs::path run_dir = parent / (command + "-seed" + std::to_string(seed));
    if (fs::exists(run_dir)) {
        if (!force)
            throw ConfigError("run directory " + run_dir.string() +
                              " already exists (use --force to overwrite)");
        fs::remove_all(run_dir);
    }
    fs::create_directories(run_dir);
    return run_dir;
}

void write_manifest(const fs::path& run_dir, const std::string& command, std::uint64_t seed,
                    const nlohmann::json& resolved_config, const nlohmann::json& config_sources,
                    const std::vector<ManifestInput>& inputs, const std::vector<std::string>& outputs,
                    double duration_seconds) {
    nlohmann::json doc;
    doc["command"] = command;
    doc["version"] = kVersion;
    doc["seed"] = seed;
    doc["config"] = resolved_config;
    doc["config_sources"] = config_sources;
    auto& in = doc["inputs"];
    in = nlohmann::json::array();
    for (const auto& input : inputs)
        in.push_back({{"role", input.role},
                      {"path", input.path.string()},
                      {"sha256", sha256_hex(input.path)}});
    doc["outputs"] = outputs;
    const auto now = std::chrono::system_clock::now().time_since_epoch();
    doc["timing"] = {
        {"duration_seconds", duration_seconds},
        {"written_unix_ms", std::chrono::duration_cast<std::chrono::milliseconds>(now).count()}};
    write_output(run_dir, "manifest.json", doc.dump(2) + "\n");
}

void write_output(const fs::path& run_dir, const std::string& name, const std::string& content) {
    std::ofstream file(run_dir / name, std::ios::binary);
    if (!file) throw ParseError("cannot write " + (run_dir / name).string());
    file << content;
}

}  // namespace cogdiag::cli
