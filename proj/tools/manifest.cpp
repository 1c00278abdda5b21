#include "manifest.hpp"

#include <openssl/evp.h>

#include <cstdio>

#include "dualres/dataset.hpp"

namespace dualres::cli {

std::string git_blob_digest(const std::string& content) {
  const std::string header = "blob " + std::to_string(content.size()) + '\0';
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr);
  EVP_DigestUpdate(ctx, header.data(), header.size());
  EVP_DigestUpdate(ctx, content.data(), content.size());
  EVP_DigestFinal_ex(ctx, digest, &length);
  EVP_MD_CTX_free(ctx);
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < length; ++i) {
    std::snprintf(buf, sizeof(buf), "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

std::string file_digest(const std::filesystem::path& path) { return git_blob_digest(read_text_file(path)); }

RunManifest::RunManifest(std::string command) {
  doc_["command"] = std::move(command);
  doc_["inputs"] = nlohmann::json::object();
  doc_["outputs"] = nlohmann::json::array();
}

void RunManifest::add_input(const std::string& role, const std::filesystem::path& path) {
  doc_["inputs"][role] = {{"path", path.string()}, {"digest", file_digest(path)}};
}

void RunManifest::add_output(const std::filesystem::path& path) {
  doc_["outputs"].push_back({{"path", path.string()}, {"digest", file_digest(path)}});
}

void RunManifest::write(const std::filesystem::path& path) const { write_text_file(path, doc_.dump(2) + "\n"); }

std::filesystem::path manifest_path_for(const std::filesystem::path& output) {
  return std::filesystem::path(output.string() + ".manifest.json");
}

}  // namespace dualres::cli
