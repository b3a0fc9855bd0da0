#include "leray/propagator.hpp"

#include <json.hpp>

#include <cmath>

namespace leray::propagator {

std::string region_name(Region r) { return r == Region::minus ? "omega_minus" : "omega_plus"; }

Region region_of(const Vec3& x) {
    return 1.0 + x(2) > std::hypot(x(0), x(1)) ? Region::minus : Region::plus;
}

std::vector<Vec3> ray_points(const Vec3& dir, double s0, double s1, int n, std::vector<double>* s) {
    if (!(s0 > 0.0) || !(s1 > s0) || n < 2) throw ValidationError("ray: need 0 < s0 < s1, n >= 2");
    const Vec3 e = dir.normalized();
    std::vector<Vec3> pts;
    if (s) s->clear();
    for (int k = 0; k < n; ++k) {
        const double sk = s0 * std::pow(s1 / s0, double(k) / (n - 1));
        pts.push_back(sk * e);
        if (s) s->push_back(sk);
    }
    return pts;
}

SlopeFit fit_slope(const std::vector<double>& s, const std::vector<double>& y) {
    SlopeFit f;
    if (s.size() != y.size() || s.size() < 2) {
        f.note = "need at least two samples";
        return f;
    }
    double lo = s[0], hi = s[0];
    for (double v : s) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (!(lo > 0.0) || hi / lo < 10.0 * (1.0 - 1e-12)) {
        f.note = "insufficient dynamic range (less than one decade)";
        return f;
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (size_t i = 0; i < s.size(); ++i) {
        if (!(y[i] > 0.0) || !std::isfinite(y[i])) {
            f.note = "non-positive or non-finite samples";
            return f;
        }
        const double lx = std::log(s[i]), ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    const double n = double(s.size());
    f.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    f.ok = std::isfinite(f.slope);
    return f;
}

DecayReport decay_report(const std::vector<RaySamples>& rays, double delta) {
    DecayReport rep;
    rep.delta = delta;
    bool all_zero = true;
    for (const auto& r : rays) {
        if (r.field.gradients.size() != r.field.values.size())
            throw ValidationError("decay_report: gradient samples required on ray " + r.name);
        if (r.s.size() != r.field.values.size())
            throw ValidationError("decay_report: distances do not match samples on " + r.name);
        for (const auto& x : r.field.points)
            if (region_of(x) != r.region)
                throw ValidationError("decay_report: ray " + r.name + " leaves " +
                                      region_name(r.region));
        for (size_t i = 0; i < r.s.size(); ++i)
            if (r.field.values[i].norm() > 0.0 || r.field.gradients[i].norm() > 0.0) all_zero = false;
    }
    if (all_zero) {
        rep.trivial = true;
        rep.pass = false;
        return rep;
    }
    rep.pass = !rays.empty();
    for (const auto& r : rays) {
        std::vector<double> u, g, e;
        for (size_t i = 0; i < r.s.size(); ++i) {
            const Vec3& x = r.field.points[i];
            const Vec3& v = r.field.values[i];
            const Mat3& G = r.field.gradients[i];
            u.push_back(v.norm());
            g.push_back(G.norm());
            e.push_back((v + G * x).norm());
        }
        // |U| ~ |x|^-1 everywhere; derivatives ~ (1+x3)^-1 |x|^-1 in Omega_-
        // and x3^-delta <x>^(2 delta - 2) in Omega_+; on a ray x3 ~ |x|.
        const double dslope = r.region == Region::minus ? -2.0 : -2.0 + delta;
        struct Q {
            const char* name;
            const std::vector<double>* y;
            double target, tol;
        };
        for (const Q& q : {Q{"abs_U0", &u, -1.0, 0.15}, Q{"abs_grad_U0", &g, dslope, 0.3},
                           Q{"abs_U0_plus_x_grad_U0", &e, dslope, 0.3}}) {
            DecayFit f;
            f.ray = r.name;
            f.region = region_name(r.region);
            f.quantity = q.name;
            f.target_slope = q.target;
            f.tolerance = q.tol;
            f.s_min = r.s.front();
            f.s_max = r.s.back();
            const auto sf = fit_slope(r.s, *q.y);
            f.fitted = sf.ok;
            f.note = sf.note;
            if (sf.ok) {
                f.slope = sf.slope;
                f.pass = std::abs(sf.slope - q.target) <= q.tol;
                f.within_bound = sf.slope <= q.target + q.tol;
            }
            rep.pass = rep.pass && f.pass;
            rep.fits.push_back(f);
        }
    }
    return rep;
}

std::string DecayReport::to_json() const {
    nlohmann::ordered_json j;
    j["trivial"] = trivial;
    if (trivial) j["note"] = "no decay fit possible: field is identically zero";
    j["delta"] = delta;
    j["pass"] = pass;
    auto arr = nlohmann::ordered_json::array();
    for (const auto& f : fits) {
        nlohmann::ordered_json o;
        o["ray"] = f.ray;
        o["region"] = f.region;
        o["quantity"] = f.quantity;
        o["fitted_slope"] = f.fitted ? nlohmann::ordered_json(f.slope) : nlohmann::ordered_json();
        o["target_slope"] = f.target_slope;
        o["tolerance"] = f.tolerance;
        o["s_min"] = f.s_min;
        o["s_max"] = f.s_max;
        o["within_bound"] = f.within_bound;
        o["pass"] = f.pass;
        if (!f.note.empty()) o["note"] = f.note;
        arr.push_back(o);
    }
    j["fits"] = arr;
    return j.dump(2);
}

}  // namespace leray::propagator
