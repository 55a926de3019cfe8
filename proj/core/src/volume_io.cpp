#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>

#include "biopsym/error.hpp"
#include "biopsym/volume.hpp"

namespace biopsym {

namespace {

constexpr std::string_view kMagic = "USVOL1";
constexpr std::size_t kMaxHeaderBytes = 4096;

}  // namespace

UsVolume read_volume(std::istream& in) {
  std::string header;
  char ch = 0;
  while (in.get(ch) && ch != '\n') {
    header.push_back(ch);
    if (header.size() > kMaxHeaderBytes) throw Error(Errc::malformed_header, "USVOL header line too long");
  }
  if (ch != '\n') throw Error(Errc::malformed_header, "USVOL header is not newline terminated");

  std::istringstream hs(header);
  hs.imbue(std::locale::classic());
  std::string magic;
  long long n[3];
  double s[3], o[3];
  hs >> magic >> n[0] >> n[1] >> n[2] >> s[0] >> s[1] >> s[2] >> o[0] >> o[1] >> o[2];
  if (!hs || magic != kMagic) throw Error(Errc::malformed_header, "malformed USVOL header: '" + header + "'");
  hs >> std::ws;
  if (!hs.eof()) throw Error(Errc::malformed_header, "trailing tokens in USVOL header");

  for (long long d : n) {
    if (d < 2 || d > std::numeric_limits<int>::max()) {
      throw Error(Errc::invariant_violation, "USVOL dims must be >= 2");
    }
  }
  for (double sp : s) {
    if (!(sp > 0.0) || !std::isfinite(sp)) throw Error(Errc::invariant_violation, "USVOL spacing must be positive");
  }

  constexpr long long kMaxVoxels = 1LL << 32;
  if (n[0] > kMaxVoxels / n[1] || n[0] * n[1] > kMaxVoxels / n[2]) {
    throw Error(Errc::invariant_violation, "USVOL dims exceed the 2^32 voxel limit");
  }
  const auto count = static_cast<std::size_t>(n[0]) * static_cast<std::size_t>(n[1]) * static_cast<std::size_t>(n[2]);
  std::vector<std::uint8_t> voxels(count);
  in.read(reinterpret_cast<char*>(voxels.data()), static_cast<std::streamsize>(count));
  if (static_cast<std::size_t>(in.gcount()) != count) {
    throw Error(Errc::truncated_payload, "USVOL payload truncated: expected " + std::to_string(count) +
                                             " bytes, got " + std::to_string(in.gcount()));
  }
  return UsVolume({static_cast<int>(n[0]), static_cast<int>(n[1]), static_cast<int>(n[2])}, Vec3(s[0], s[1], s[2]),
                  Vec3(o[0], o[1], o[2]), std::move(voxels));
}

void write_volume(const UsVolume& vol, std::ostream& out) {
  std::ostringstream hs;
  hs.imbue(std::locale::classic());
  // 17 significant digits round-trip every double.
  hs << std::setprecision(17) << kMagic << ' ' << vol.dims()[0] << ' ' << vol.dims()[1] << ' ' << vol.dims()[2];
  for (int a = 0; a < 3; ++a) hs << ' ' << vol.spacing()[a];
  for (int a = 0; a < 3; ++a) hs << ' ' << vol.origin()[a];
  hs << '\n';
  const std::string header = hs.str();
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(reinterpret_cast<const char*>(vol.voxels().data()), static_cast<std::streamsize>(vol.voxel_count()));
  if (!out) throw Error(Errc::io_failure, "failed writing USVOL stream");
}

UsVolume load_volume(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_failure, "cannot open volume " + path.string());
  return read_volume(in);
}

void save_volume(const UsVolume& vol, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io_failure, "cannot open " + path.string() + " for writing");
  write_volume(vol, out);
}

}  // namespace biopsym
