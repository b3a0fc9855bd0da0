#include "leray/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <cstdint>
#include <random>
#include <sstream>

namespace leray::data {

namespace {

Vec3 swirl(const Vec3& x) {
    const double r = x.norm();
    const double f = x(2) / (r * r * r);
    return {-x(1) * f, x(0) * f, 0.0};
}

// curl of x3^2 (-x2, x1, 0)/|x|^3
Vec3 poloidal(const Vec3& x) {
    const double r2 = x.squaredNorm();
    const double r = std::sqrt(r2);
    const double r3 = r2 * r, r5 = r3 * r2;
    const double z = x(2);
    const double g = 2.0 * z / r3 - 3.0 * z * z * z / r5;
    const double rho2 = x(0) * x(0) + x(1) * x(1);
    return {-x(0) * g, -x(1) * g, z * z * (2.0 / r3 - 3.0 * rho2 / r5)};
}

int wrap(int j, int n) {
    j %= n;
    return j < 0 ? j + n : j;
}

double lagrange_weight(int k, double s) {
    // cubic through nodes -1, 0, 1, 2 evaluated at s in [0, 1)
    switch (k) {
        case 0: return -s * (s - 1.0) * (s - 2.0) / 6.0;
        case 1: return (s + 1.0) * (s - 1.0) * (s - 2.0) / 2.0;
        case 2: return -(s + 1.0) * s * (s - 2.0) / 2.0;
        default: return (s + 1.0) * s * (s - 1.0) / 6.0;
    }
}

double lagrange_general(const double* nodes, int k, double x) {
    double w = 1.0;
    for (int m = 0; m < 4; ++m)
        if (m != k) w *= (x - nodes[m]) / (nodes[k] - nodes[m]);
    return w;
}

}  // namespace

SelfSimilarDatum SelfSimilarDatum::builtin(const std::string& name, double amplitude) {
    if (name != "zero" && name != "swirl" && name != "poloidal")
        throw ValidationError("unknown catalog datum '" + name + "'");
    SelfSimilarDatum d;
    d.kind_ = Kind::builtin;
    d.name_ = name;
    d.amplitude_ = amplitude;
    d.zero_ = (name == "zero") || amplitude == 0.0;
    d.normal_ = (name == "poloidal") && !d.zero_;
    d.finish();
    return d;
}

SelfSimilarDatum SelfSimilarDatum::tabulated(int n_theta, int n_phi, std::vector<Vec3> values,
                                             int interpolation_order) {
    if (n_theta < 4 || n_phi < 4 || n_phi % 2 != 0)
        throw ValidationError("tabulated datum: need n_theta >= 4 and even n_phi >= 4");
    if (values.size() != size_t(n_theta) * n_phi)
        throw ValidationError("tabulated datum: sample count does not match mesh");
    if (interpolation_order != 1 && interpolation_order != 3)
        throw ValidationError("tabulated datum: interpolation order must be 1 or 3");
    SelfSimilarDatum d;
    d.kind_ = Kind::tabulated;
    d.name_ = "tabulated";
    d.order_ = interpolation_order;
    d.nt_ = n_theta;
    d.np_ = n_phi;
    bool zero = true, normal = false;
    for (const auto& v : values) {
        if (v.squaredNorm() > 0.0) zero = false;
        if (v(2) != 0.0) normal = true;
    }
    d.zero_ = zero;
    d.normal_ = normal;
    d.table_ = std::make_shared<const std::vector<Vec3>>(std::move(values));
    d.finish();
    return d;
}

SelfSimilarDatum SelfSimilarDatum::load_csv(const std::string& path, int interpolation_order) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open datum file '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw ValidationError("datum file is empty");
    std::vector<std::string> cols;
    {
        std::stringstream ss(line);
        std::string c;
        while (std::getline(ss, c, ',')) {
            c.erase(std::remove_if(c.begin(), c.end(), ::isspace), c.end());
            cols.push_back(c);
        }
    }
    const std::vector<std::string> want{"theta", "phi", "a1", "a2", "a3"};
    if (cols != want) throw ValidationError("datum CSV header must be theta,phi,a1,a2,a3");

    struct Row { double th, ph; Vec3 a; };
    std::vector<Row> rows;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::stringstream ss(line);
        Row r;
        if (!(ss >> r.th >> r.ph >> r.a(0) >> r.a(1) >> r.a(2)))
            throw ValidationError("malformed datum CSV row: " + line);
        rows.push_back(r);
    }
    if (rows.empty()) throw ValidationError("datum CSV has no samples");

    std::vector<double> th, ph;
    for (const auto& r : rows) { th.push_back(r.th); ph.push_back(r.ph); }
    auto uniq = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        std::vector<double> u;
        for (double x : v)
            if (u.empty() || x - u.back() > 1e-9) u.push_back(x);
        return u;
    };
    th = uniq(th);
    ph = uniq(ph);
    const int nt = int(th.size()), np = int(ph.size());
    if (size_t(nt) * np != rows.size())
        throw ValidationError("datum CSV is not a full latitude-longitude mesh");
    const double dth = 0.5 * M_PI / (nt - 1), dph = 2.0 * M_PI / np;
    for (int i = 0; i < nt; ++i)
        if (std::abs(th[i] - i * dth) > 1e-6)
            throw ValidationError("datum CSV theta values must be uniform on [0, pi/2]");
    for (int j = 0; j < np; ++j)
        if (std::abs(ph[j] - j * dph) > 1e-6)
            throw ValidationError("datum CSV phi values must be uniform on [0, 2pi)");
    std::vector<Vec3> vals(rows.size());
    for (const auto& r : rows) {
        const int i = int(std::lround(r.th / dth));
        const int j = int(std::lround(r.ph / dph));
        vals[size_t(i) * np + j] = r.a;
    }
    auto d = tabulated(nt, np, std::move(vals), interpolation_order);
    d.name_ = path;
    return d;
}

SelfSimilarDatum SelfSimilarDatum::from_spec(const std::string& spec) {
    if (spec.size() > 4 && spec.substr(spec.size() - 4) == ".csv") return load_csv(spec);
    const auto star = spec.find('*');
    if (star != std::string::npos) {
        double eps = 0.0;
        try {
            eps = std::stod(spec.substr(0, star));
        } catch (const std::exception&) {
            throw ValidationError("bad datum amplitude in '" + spec + "'");
        }
        return builtin(spec.substr(star + 1), eps);
    }
    return builtin(spec);
}

void SelfSimilarDatum::finish() { c1_ = estimate_c1_seminorm(*this); }

std::vector<HemisphereSample> SelfSimilarDatum::hemisphere_samples() const {
    std::vector<HemisphereSample> out;
    if (kind_ != Kind::tabulated) return out;
    const double dth = 0.5 * M_PI / (nt_ - 1), dph = 2.0 * M_PI / np_;
    for (int i = 0; i < nt_; ++i)
        for (int j = 0; j < np_; ++j) {
            const double th = i * dth, ph = j * dph;
            Vec3 xh(std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th));
            out.push_back({xh, (*table_)[size_t(i) * np_ + j]});
        }
    return out;
}

Vec3 SelfSimilarDatum::table_lookup(double theta, double phi) const {
    const auto& T = *table_;
    const double dth = 0.5 * M_PI / (nt_ - 1), dph = 2.0 * M_PI / np_;
    // theta index below zero wraps over the pole to phi + pi
    auto at = [&](int i, int j) -> const Vec3& {
        if (i < 0) {
            i = -i;
            j += np_ / 2;
        }
        return T[size_t(i) * np_ + wrap(j, np_)];
    };
    const double u = theta / dth, v = phi / dph;
    if (order_ == 1) {
        int i = std::min(int(std::floor(u)), nt_ - 2);
        const int j = int(std::floor(v));
        const double s = u - i, r = v - j;
        return (1 - s) * ((1 - r) * at(i, j) + r * at(i, j + 1)) +
               s * ((1 - r) * at(i + 1, j) + r * at(i + 1, j + 1));
    }
    const int j = int(std::floor(v));
    const double r = v - j;
    int i0 = int(std::floor(u)) - 1;
    i0 = std::min(i0, nt_ - 4);
    double nodes[4];
    for (int m = 0; m < 4; ++m) nodes[m] = i0 + m;
    Vec3 acc = Vec3::Zero();
    for (int m = 0; m < 4; ++m) {
        const double wi = lagrange_general(nodes, m, u);
        Vec3 row = Vec3::Zero();
        for (int k = 0; k < 4; ++k) row += lagrange_weight(k, r) * at(i0 + m, j - 1 + k);
        acc += wi * row;
    }
    return acc;
}

Vec3 SelfSimilarDatum::on_sphere(const Vec3& xh) const {
    const double theta = std::acos(std::clamp(xh(2), -1.0, 1.0));
    double phi = std::atan2(xh(1), xh(0));
    if (phi < 0) phi += 2.0 * M_PI;
    return table_lookup(theta, phi);
}

Vec3 SelfSimilarDatum::evaluate_raw(const Vec3& x) const {
    if (zero_) return Vec3::Zero();
    if (kind_ == Kind::builtin) {
        if (name_ == "swirl") return amplitude_ * swirl(x);
        return amplitude_ * poloidal(x);
    }
    const double r = x.norm();
    return on_sphere(x / r) / r;
}

Vec3 SelfSimilarDatum::evaluate(const Vec3& x) const {
    if (!(x.norm() > 0.0)) throw DomainError("datum is singular at the origin");
    if (x(2) < 0.0) throw DomainError("datum is defined for x3 >= 0 only");
    return evaluate_raw(x);
}

std::string SelfSimilarDatum::fingerprint() const {
    char buf[64];
    if (kind_ == Kind::builtin) {
        std::snprintf(buf, sizeof buf, "%.17g", amplitude_);
        return name_ + "*" + buf;
    }
    uint64_t h = 1469598103934665603ull;
    for (const auto& v : *table_)
        for (int k = 0; k < 3; ++k) {
            const double c = v(k);
            const auto* p = reinterpret_cast<const unsigned char*>(&c);
            for (size_t b = 0; b < sizeof c; ++b) h = (h ^ p[b]) * 1099511628211ull;
        }
    std::snprintf(buf, sizeof buf, "tab%d_%d_%d_%016llx", nt_, np_, order_,
                  static_cast<unsigned long long>(h));
    return buf;
}

Vec3 evaluate_datum(const SelfSimilarDatum& d, const Vec3& x) { return d.evaluate(x); }

double divergence_residual(const SelfSimilarDatum& d, const Vec3& x, double h) {
    double div = 0.0;
    for (int k = 0; k < 3; ++k) {
        Vec3 e = Vec3::Zero();
        e(k) = h;
        div += (d.evaluate(x + e)(k) - d.evaluate(x - e)(k)) / (2.0 * h);
    }
    return div;
}

double estimate_c1_seminorm(const SelfSimilarDatum& d) {
    if (d.is_zero()) return 0.0;
    const double h = 1e-4;
    double amax = 0.0, gmax = 0.0;
    const int nt = 24, np = 48;
    for (int i = 0; i <= nt; ++i) {
        const double th = (0.5 * M_PI - 0.02) * i / nt;
        for (int j = 0; j < np; ++j) {
            const double ph = 2.0 * M_PI * j / np;
            const Vec3 x(std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th));
            amax = std::max(amax, d.evaluate_raw(x).norm());
            Mat3 g;
            for (int k = 0; k < 3; ++k) {
                Vec3 e = Vec3::Zero();
                e(k) = h;
                g.col(k) = (d.evaluate_raw(x + e) - d.evaluate_raw(x - e)) / (2.0 * h);
            }
            gmax = std::max(gmax, g.norm());
        }
    }
    return std::max(amax, gmax);
}

ValidationReport check_datum(const SelfSimilarDatum& d, double tolerance) {
    ValidationReport rep{0.0, 0.0, true};
    if (d.is_zero()) return rep;
    const double scale = std::max(d.c1_seminorm_estimate(), 1e-300);
    std::mt19937_64 rng(12345);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    int done = 0;
    while (done < 100) {
        Vec3 x(U(rng), U(rng), 0.5 * (U(rng) + 1.0));
        const double r = x.norm();
        if (r < 0.2 || r > 1.0 || x(2) < 0.05) continue;
        x /= r;
        const double res = std::abs(divergence_residual(d, x, 1e-3)) / scale;
        rep.max_divergence = std::max(rep.max_divergence, res);
        ++done;
    }
    for (int j = 0; j < 360; ++j) {
        const double ph = 2.0 * M_PI * j / 360.0;
        rep.max_boundary = std::max(
            rep.max_boundary, d.evaluate(Vec3(std::cos(ph), std::sin(ph), 0.0)).norm() / scale);
    }
    const double tol_div = std::max(tolerance, d.kind() == Kind::builtin ? 1e-5 : 1e-3);
    const double tol_bnd = d.kind() == Kind::builtin ? 1e-12 : std::max(tolerance, 1e-6);
    rep.ok = rep.max_divergence <= tol_div && rep.max_boundary <= tol_bnd;
    return rep;
}

void validate_datum(const SelfSimilarDatum& d, double tolerance) {
    const auto rep = check_datum(d, tolerance);
    if (!rep.ok) {
        std::ostringstream os;
        os << "datum '" << d.name() << "' fails validation: relative divergence "
           << rep.max_divergence << ", boundary magnitude " << rep.max_boundary;
        throw ValidationError(os.str());
    }
}

}  // namespace leray::data
