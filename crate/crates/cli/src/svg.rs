/// Line chart of true and predicted RUL against window index.
pub fn rul_plot(truth: &[f64], pred: &[f64], title: &str) -> String {
    const W: f64 = 720.0;
    const H: f64 = 400.0;
    const PAD: f64 = 50.0;
    let n = truth.len().max(2) as f64 - 1.0;
    let lo = pred.iter().chain(truth).fold(0.0f64, |a, &b| a.min(b));
    let hi = pred.iter().chain(truth).fold(1.0f64, |a, &b| a.max(b));
    let x = |i: usize| PAD + (W - 2.0 * PAD) * i as f64 / n;
    let y = |v: f64| H - PAD - (H - 2.0 * PAD) * (v - lo) / (hi - lo);
    let line = |vals: &[f64]| {
        vals.iter()
            .enumerate()
            .map(|(i, &v)| format!("{:.2},{:.2}", x(i), y(v)))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" text-anchor=\"middle\">{}</text>\n",
        W / 2.0,
        escape(title)
    );
    svg.push_str(&format!(
        "<line x1=\"{PAD}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n\
         <line x1=\"{PAD}\" y1=\"{PAD}\" x2=\"{PAD}\" y2=\"{b}\" stroke=\"black\"/>\n",
        b = H - PAD,
        r = W - PAD
    ));
    for tick in [lo, 0.0, 0.5, 1.0, hi] {
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{tick:.2}</text>\n",
            PAD - 6.0,
            y(tick) + 4.0
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">window index</text>\n",
        W / 2.0,
        H - 12.0
    ));
    svg.push_str(&format!("<polyline fill=\"none\" stroke=\"black\" stroke-width=\"2\" points=\"{}\"/>\n", line(truth)));
    svg.push_str(&format!("<polyline fill=\"none\" stroke=\"#d62728\" stroke-width=\"1.5\" points=\"{}\"/>\n", line(pred)));
    svg.push_str(&format!(
        "<text x=\"{r}\" y=\"{PAD}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"end\">true RUL</text>\n\
         <text x=\"{r}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"end\" fill=\"#d62728\">predicted RUL</text>\n",
        PAD + 16.0,
        r = W - PAD
    ));
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
