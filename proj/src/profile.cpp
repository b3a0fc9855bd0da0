#include "leray/binio.hpp"
#include "leray/propagator.hpp"
#include "leray/quadrature.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>

namespace leray::propagator {

namespace {
constexpr int kChannels = 18;
constexpr char kMagic[8] = {'L', 'E', 'R', 'A', 'Y', 'P', 'T', '2'};
}  // namespace

std::string ProfileTable::make_key(const data::SelfSimilarDatum& d, double extent,
                                   const QuadratureSpec& q, double du) {
    std::ostringstream os;
    os.precision(17);
    os << d.fingerprint() << "|E=" << extent << "|du=" << du << "|R=" << q.radial_cutoff
       << "|n=" << q.points_per_dim << "|tol=" << q.tolerance;
    return os.str();
}

ProfileTable ProfileTable::zero(double extent) {
    ProfileTable p;
    p.E_ = extent;
    p.zero_ = true;
    return p;
}

ProfileTable ProfileTable::build(const data::SelfSimilarDatum& d, double extent,
                                 const QuadratureSpec& q, int jobs, double du) {
    if (!(extent > 0.0) || !(du > 0.0)) throw ValidationError("profile table: bad extent or spacing");
    ProfileTable p;
    p.key_ = make_key(d, extent, q, du);
    p.E_ = extent;
    p.m_ = int(std::ceil(std::asinh(extent) / du));
    p.hu_ = std::asinh(extent) / p.m_;
    p.n_ = 2 * p.m_ + 1;
    p.nz_ = int(std::ceil(std::asinh(extent) / du)) + 1;
    p.hz_ = std::asinh(extent) / (p.nz_ - 1);
    p.zero_ = d.is_zero();
    if (p.zero_) return p;

    std::vector<Vec3> pts;
    pts.reserve(size_t(p.n_) * p.n_ * p.nz_);
    for (int l = 0; l < p.nz_; ++l)
        for (int j = 0; j < p.n_; ++j)
            for (int i = 0; i < p.n_; ++i)
                pts.emplace_back(std::sinh((i - p.m_) * p.hu_), std::sinh((j - p.m_) * p.hu_),
                                 std::sinh(l * p.hz_));
    Options opt;
    opt.derivs = kGradient | kLaplacian;
    opt.jobs = jobs;
    const auto f = propagate_solonnikov(d, 0.5, pts, q, opt);
    p.v_.resize(pts.size() * kChannels);
    for (size_t k = 0; k < pts.size(); ++k) {
        double* o = p.v_.data() + k * kChannels;
        for (int a = 0; a < 3; ++a) {
            o[a] = f.values[k](a);
            for (int b = 0; b < 3; ++b) o[3 + 3 * a + b] = f.gradients[k](a, b);
            o[12 + a] = f.laplacians[k](a);
        }
        const Vec3 lin = f.laplacians[k] + f.values[k] + f.gradients[k] * pts[k];
        for (int a = 0; a < 3; ++a) o[15 + a] = lin(a);
    }
    p.max_error_ = f.quadrature_error_estimate;
    return p;
}

ProfileSample ProfileTable::operator()(const Vec3& x) const {
    if (!(x(2) >= 0.0) || std::abs(x(0)) > E_ || std::abs(x(1)) > E_ || x(2) > E_)
        throw DomainError("profile table: point outside the tabulated box");
    ProfileSample s;
    if (zero_) return s;
    double wx[4], wy[4], wz[4];
    const int i0 = quad::lagrange4(std::asinh(x(0)) / hu_ + m_, n_, wx);
    const int j0 = quad::lagrange4(std::asinh(x(1)) / hu_ + m_, n_, wy);
    const int l0 = quad::lagrange4(std::asinh(x(2)) / hz_, nz_, wz);
    double acc[kChannels] = {};
    for (int c = 0; c < 4; ++c)
        for (int b = 0; b < 4; ++b) {
            const double wbc = wy[b] * wz[c];
            for (int a = 0; a < 4; ++a) {
                const double w = wx[a] * wbc;
                const double* o =
                    v_.data() + ((size_t(l0 + c) * n_ + (j0 + b)) * n_ + (i0 + a)) * kChannels;
                for (int ch = 0; ch < kChannels; ++ch) acc[ch] += w * o[ch];
            }
        }
    for (int a = 0; a < 3; ++a) {
        s.value(a) = acc[a];
        for (int b = 0; b < 3; ++b) s.grad(a, b) = acc[3 + 3 * a + b];
        s.lap(a) = acc[12 + a];
        s.linear(a) = acc[15 + a];
    }
    if (x(2) == 0.0) s.value.setZero();
    return s;
}

ProfileTable ProfileTable::scaled(double c) const {
    ProfileTable p = *this;
    for (double& v : p.v_) v *= c;
    p.max_error_ *= std::abs(c);
    std::ostringstream os;
    os.precision(17);
    os << key_ << "|scale=" << c;
    p.key_ = os.str();
    if (c == 0.0) p.zero_ = true;
    return p;
}

void ProfileTable::save(const std::string& path) const {
    binio::Writer w;
    w.raw(kMagic, 8);
    w.str(key_);
    w.f64(E_);
    w.f64(hu_);
    w.f64(hz_);
    w.f64(max_error_);
    w.u64(std::uint64_t(m_));
    w.u64(std::uint64_t(nz_));
    w.u64(zero_ ? 1 : 0);
    w.f64s(v_);
    w.save(path);
}

ProfileTable ProfileTable::load(const std::string& path) {
    binio::Reader r(path);
    char magic[8];
    r.raw(magic, 8);
    if (std::memcmp(magic, kMagic, 8) != 0) throw IntegrityError(path + ": not a profile table");
    ProfileTable p;
    p.key_ = r.str();
    p.E_ = r.f64();
    p.hu_ = r.f64();
    p.hz_ = r.f64();
    p.max_error_ = r.f64();
    p.m_ = int(r.u64());
    p.n_ = 2 * p.m_ + 1;
    p.nz_ = int(r.u64());
    p.zero_ = r.u64() != 0;
    p.v_ = r.f64s();
    if (!r.done() || (!p.zero_ && p.v_.size() != size_t(p.n_) * p.n_ * p.nz_ * kChannels))
        throw IntegrityError(path + ": inconsistent profile table");
    return p;
}

ProfileTable ProfileTable::cached(const data::SelfSimilarDatum& d, double extent,
                                  const QuadratureSpec& q, const std::string& dir, int jobs, double du) {
    const std::string key = make_key(d, extent, q, du);
    char name[64];
    std::snprintf(name, sizeof name, "profile_%016llx.bin",
                  static_cast<unsigned long long>(binio::fnv1a(key.data(), key.size())));
    const std::filesystem::path path = std::filesystem::path(dir) / name;
    if (std::filesystem::exists(path)) {
        try {
            auto p = load(path.string());
            if (p.key_ == key) return p;
        } catch (const IntegrityError&) {
            // stale or damaged cache entry: rebuild below
        }
    }
    auto p = build(d, extent, q, jobs, du);
    std::filesystem::create_directories(dir);
    p.save(path.string());
    return p;
}

}  // namespace leray::propagator
