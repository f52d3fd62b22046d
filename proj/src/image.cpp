#include "reloc/image.hpp"

#include <fstream>
#include <string>

namespace reloc {

Image Image::solid(int width, int height, std::uint8_t r, std::uint8_t g,
                   std::uint8_t b) {
  Image img;
  img.width = width;
  img.height = height;
  img.pixels.resize(static_cast<std::size_t>(width) * height * 3);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) img.set(y, x, r, g, b);
  return img;
}

namespace {

// Reads one whitespace-delimited header token, skipping '#' comments.
std::string next_token(const std::string& buf, std::size_t& pos,
                       const std::string& name) {
  while (pos < buf.size()) {
    const char c = buf[pos];
    if (c == '#') {
      while (pos < buf.size() && buf[pos] != '\n') ++pos;
    } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
      ++pos;
    } else {
      break;
    }
  }
  if (pos >= buf.size())
    throw FormatError(name + ": truncated header", pos);
  const std::size_t start = pos;
  while (pos < buf.size() && !std::isspace(static_cast<unsigned char>(buf[pos])))
    ++pos;
  return buf.substr(start, pos - start);
}

int parse_dim(const std::string& tok, std::size_t at, const std::string& name) {
  try {
    const long v = std::stol(tok);
    if (v < 1 || v > 1 << 20) throw std::out_of_range("dim");
    return static_cast<int>(v);
  } catch (const std::exception&) {
    throw FormatError(name + ": bad header value '" + tok + "'", at);
  }
}

}  // namespace

Image load_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string(), 0);
  std::string buf((std::istreambuf_iterator<char>(in)),
                  std::istreambuf_iterator<char>());
  const std::string name = path.filename().string();

  std::size_t pos = 0;
  if (next_token(buf, pos, name) != "P6")
    throw FormatError(name + ": not a P6 pixmap", 0);
  std::size_t at = pos;
  const int width = parse_dim(next_token(buf, pos, name), at, name);
  at = pos;
  const int height = parse_dim(next_token(buf, pos, name), at, name);
  at = pos;
  const std::string maxval = next_token(buf, pos, name);
  if (maxval != "255")
    throw FormatError(name + ": unsupported maxval " + maxval, at);
  if (pos >= buf.size())
    throw FormatError(name + ": truncated after header", pos);
  ++pos;  // single whitespace byte separates header from payload

  const std::size_t need = static_cast<std::size_t>(width) * height * 3;
  if (buf.size() - pos < need)
    throw FormatError(name + ": truncated pixel payload", buf.size());
  Image img;
  img.width = width;
  img.height = height;
  img.pixels.assign(buf.begin() + static_cast<std::ptrdiff_t>(pos),
                    buf.begin() + static_cast<std::ptrdiff_t>(pos + need));
  return img;
}

void save_ppm(const std::filesystem::path& path, const Image& image) {
  if (image.empty()) throw InvalidArgument("save_ppm: empty image");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path.string() + " for write", 0);
  out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.pixels.data()),
            static_cast<std::streamsize>(image.pixels.size()));
  if (!out) throw FormatError("short write on " + path.string(), 0);
}

}  // namespace reloc
