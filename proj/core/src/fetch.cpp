#include "irsc/fetch.hpp"

#include <openssl/evp.h>

#include <fstream>
#include <stdexcept>
#include <vector>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

namespace irsc::data {

namespace {

std::string to_hex(const unsigned char* digest, unsigned int len) {
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

struct UrlParts {
  std::string scheme_host;  // e.g. https://host:port
  std::string path;
};

UrlParts split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw std::invalid_argument("fetch: url missing scheme: " + url);
  }
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) {
    return {url, "/"};
  }
  return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("sha256: cannot open " + path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  std::vector<char> buf(1 << 16);
  while (is) {
    is.read(buf.data(), buf.size());
    EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(is.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  return to_hex(digest, len);
}

std::string sha256_string(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  EVP_DigestUpdate(ctx, bytes.data(), bytes.size());
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  return to_hex(digest, len);
}

void fetch(const RemoteFile& file) {
  namespace fs = std::filesystem;
  if (fs::exists(file.dest)) {
    if (file.sha256.empty() || sha256_file(file.dest) == file.sha256) return;
  }
  const UrlParts parts = split_url(file.url);
  httplib::Client client(parts.scheme_host);
  client.set_follow_location(true);
  client.set_connection_timeout(30);
  client.set_read_timeout(120);
  httplib::Result res = client.Get(parts.path);
  if (!res || res->status != 200) {
    throw std::runtime_error(
        "fetch: GET " + file.url + " failed (" +
        (res ? "HTTP " + std::to_string(res->status)
             : "error: " + httplib::to_string(res.error())) +
        ")");
  }
  fs::create_directories(file.dest.parent_path().empty()
                             ? fs::path(".")
                             : file.dest.parent_path());
  {
    std::ofstream os(file.dest, std::ios::binary);
    if (!os) throw std::runtime_error("fetch: cannot write " +
                                      file.dest.string());
    os.write(res->body.data(),
             static_cast<std::streamsize>(res->body.size()));
  }
  if (!file.sha256.empty()) {
    const std::string got = sha256_file(file.dest);
    if (got != file.sha256) {
      fs::remove(file.dest);
      throw std::runtime_error("fetch: checksum mismatch for " + file.url +
                               ": got " + got + ", want " + file.sha256);
    }
  }
}

DatasetMirror default_mirror(const std::string& dataset) {
  if (dataset == "mnist") {
    return {"https://ossci-datasets.s3.amazonaws.com/mnist/"
            "train-images-idx3-ubyte.gz",
            "https://ossci-datasets.s3.amazonaws.com/mnist/"
            "t10k-images-idx3-ubyte.gz"};
  }
  if (dataset == "fashion") {
    return {"http://fashion-mnist.s3-website.eu-central-1.amazonaws.com/"
            "train-images-idx3-ubyte.gz",
            "http://fashion-mnist.s3-website.eu-central-1.amazonaws.com/"
            "t10k-images-idx3-ubyte.gz"};
  }
  throw std::invalid_argument("unknown dataset '" + dataset +
                              "' (want mnist or fashion)");
}

}  // namespace irsc::data
