#include "clodgs/metrics.hpp"

#include "clodgs/error.hpp"

#include <array>
#include <cmath>

namespace clodgs {

namespace {

constexpr int kWindow = 11;
constexpr int kRadius = kWindow / 2;
constexpr double kWindowSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

void require_same_shape(const Image& a, const Image& b) {
    if (!a.same_shape(b)) throw ConfigError("image shapes differ");
}

std::array<double, kWindow> gaussian_window() {
    std::array<double, kWindow> w{};
    double sum = 0.0;
    for (int i = 0; i < kWindow; ++i) {
        const double x = i - kRadius;
        w[i] = std::exp(-(x * x) / (2.0 * kWindowSigma * kWindowSigma));
        sum += w[i];
    }
    for (auto& v : w) v /= sum;
    return w;
}

/// Single-channel plane.
struct Plane {
    int w = 0, h = 0;
    std::vector<double> v;
    Plane(int width, int height) : w(width), h(height), v(static_cast<std::size_t>(width) * height, 0.0) {}
    double& operator()(int x, int y) { return v[static_cast<std::size_t>(y) * w + x]; }
    double operator()(int x, int y) const { return v[static_cast<std::size_t>(y) * w + x]; }
};

Plane channel(const Image& img, int c) {
    Plane p(img.width(), img.height());
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) p(x, y) = img.at(x, y, c);
    }
    return p;
}

// Valid-mode separable filter: output is (w - 10) x (h - 10).
Plane filter_valid(const Plane& in, const std::array<double, kWindow>& k) {
    Plane tmp(in.w - kWindow + 1, in.h);
    for (int y = 0; y < in.h; ++y) {
        for (int x = 0; x < tmp.w; ++x) {
            double s = 0.0;
            for (int i = 0; i < kWindow; ++i) s += k[i] * in(x + i, y);
            tmp(x, y) = s;
        }
    }
    Plane out(tmp.w, in.h - kWindow + 1);
    for (int y = 0; y < out.h; ++y) {
        for (int x = 0; x < out.w; ++x) {
            double s = 0.0;
            for (int i = 0; i < kWindow; ++i) s += k[i] * tmp(x, y + i);
            out(x, y) = s;
        }
    }
    return out;
}

// Adjoint of filter_valid.
Plane filter_adjoint(const Plane& in, const std::array<double, kWindow>& k) {
    Plane tmp(in.w, in.h + kWindow - 1);
    for (int y = 0; y < in.h; ++y) {
        for (int x = 0; x < in.w; ++x) {
            for (int i = 0; i < kWindow; ++i) tmp(x, y + i) += k[i] * in(x, y);
        }
    }
    Plane out(in.w + kWindow - 1, tmp.h);
    for (int y = 0; y < tmp.h; ++y) {
        for (int x = 0; x < tmp.w; ++x) {
            for (int i = 0; i < kWindow; ++i) out(x + i, y) += k[i] * tmp(x, y);
        }
    }
    return out;
}

Plane product(const Plane& a, const Plane& b) {
    Plane p(a.w, a.h);
    for (std::size_t i = 0; i < p.v.size(); ++i) p.v[i] = a.v[i] * b.v[i];
    return p;
}

}  // namespace

double mse(const Image& a, const Image& b) {
    require_same_shape(a, b);
    if (a.empty()) throw ConfigError("empty image");
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a.data()[i] - b.data()[i];
        sum += d * d;
    }
    return sum / static_cast<double>(a.size());
}

double psnr(const Image& a, const Image& b) {
    const double e = mse(a, b);
    if (e == 0.0) return kPsnrInfinity;
    return 10.0 * std::log10(1.0 / e);
}

double l1_loss(const Image& a, const Image& b, Image* grad) {
    require_same_shape(a, b);
    if (a.empty()) throw ConfigError("empty image");
    const double inv_n = 1.0 / static_cast<double>(a.size());
    if (grad) *grad = Image(a.width(), a.height());
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a.data()[i] - b.data()[i];
        sum += std::abs(d);
        if (grad) grad->data()[i] = d > 0.0 ? inv_n : (d < 0.0 ? -inv_n : 0.0);
    }
    return sum * inv_n;
}

double ssim(const Image& a, const Image& b, Image* grad) {
    require_same_shape(a, b);
    if (a.width() < kWindow || a.height() < kWindow) {
        throw ConfigError("image smaller than the 11x11 SSIM window");
    }
    static const auto k = gaussian_window();
    const int ow = a.width() - kWindow + 1, oh = a.height() - kWindow + 1;
    const double scale = 1.0 / (3.0 * ow * oh);
    if (grad) *grad = Image(a.width(), a.height());

    double total = 0.0;
    for (int c = 0; c < 3; ++c) {
        const Plane x = channel(a, c), y = channel(b, c);
        const Plane mx = filter_valid(x, k), my = filter_valid(y, k);
        const Plane exx = filter_valid(product(x, x), k), eyy = filter_valid(product(y, y), k);
        const Plane exy = filter_valid(product(x, y), k);
        Plane d_mu(ow, oh), d_exx(ow, oh), d_exy(ow, oh);
        for (int j = 0; j < oh; ++j) {
            for (int i = 0; i < ow; ++i) {
                const double ux = mx(i, j), uy = my(i, j);
                const double n1 = 2.0 * ux * uy + kC1;
                const double n2 = 2.0 * (exy(i, j) - ux * uy) + kC2;
                const double d1 = ux * ux + uy * uy + kC1;
                const double d2 = (exx(i, j) - ux * ux) + (eyy(i, j) - uy * uy) + kC2;
                const double den = d1 * d2;
                const double s = n1 * n2 / den;
                total += s;
                if (!grad) continue;
                const double dn1 = 2.0 * uy, dn2 = -2.0 * uy, dd1 = 2.0 * ux, dd2 = -2.0 * ux;
                d_mu(i, j) = scale * ((dn1 * n2 + n1 * dn2) / den - s * (dd1 * d2 + d1 * dd2) / den);
                d_exx(i, j) = scale * (-s / d2);
                d_exy(i, j) = scale * (2.0 * n1 / den);
            }
        }
        if (!grad) continue;
        const Plane g_mu = filter_adjoint(d_mu, k), g_xx = filter_adjoint(d_exx, k), g_xy = filter_adjoint(d_exy, k);
        for (int yy = 0; yy < a.height(); ++yy) {
            for (int xx = 0; xx < a.width(); ++xx) {
                grad->at(xx, yy, c) = g_mu(xx, yy) + 2.0 * x(xx, yy) * g_xx(xx, yy) + y(xx, yy) * g_xy(xx, yy);
            }
        }
    }
    return total * scale;
}

double dssim(const Image& a, const Image& b, Image* grad) {
    const double s = ssim(a, b, grad);
    if (grad) {
        for (auto& v : grad->data()) v *= -0.5;
    }
    return 0.5 * (1.0 - s);
}

}  // namespace clodgs
