use serde::{Deserialize, Serialize};

use super::SignalError;

/// Orthonormal two-channel analysis filter pair.
///
/// `lowpass` holds the scaling filter `h[0..L]`; `highpass` is its quadrature
/// mirror `g[n] = (-1)^n h[L-1-n]`. Synthesis uses the same pair (the
/// transform is orthogonal), so no separate reconstruction filters are stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterBank {
    pub name: String,
    pub lowpass: Vec<f64>,
    pub highpass: Vec<f64>,
}

impl FilterBank {
    pub fn from_scaling(name: impl Into<String>, lowpass: Vec<f64>) -> Self {
        let len = lowpass.len();
        let highpass = (0..len)
            .map(|n| {
                let v = lowpass[len - 1 - n];
                if n % 2 == 0 {
                    v
                } else {
                    -v
                }
            })
            .collect();
        Self {
            name: name.into(),
            lowpass,
            highpass,
        }
    }

    pub fn taps(&self) -> usize {
        self.lowpass.len()
    }
}

/// The ten-tap Daubechies filter with five vanishing moments.
pub fn db5_filters() -> FilterBank {
    daubechies(5).expect("db5 is tabulated")
}

/// Daubechies filter bank `db{order}` for `order` in 1..=10.
pub fn daubechies(order: usize) -> Result<FilterBank, SignalError> {
    if !(1..=10).contains(&order) {
        return Err(SignalError::UnknownWavelet(order));
    }
    Ok(FilterBank::from_scaling(
        format!("db{order}"),
        DAUBECHIES[order - 1].to_vec(),
    ))
}

/// One analysis step with periodized boundaries.
///
/// Odd-length inputs are extended by wrapping the first sample onto the end,
/// so both outputs have `ceil(len / 2)` entries.
pub fn dwt_level(x: &[f64], fb: &FilterBank) -> Result<(Vec<f64>, Vec<f64>), SignalError> {
    if x.is_empty() {
        return Err(SignalError::EmptyInput);
    }
    let padded;
    let x = if x.len() % 2 == 1 {
        padded = x.iter().chain(std::iter::once(&x[0])).copied().collect::<Vec<_>>();
        &padded[..]
    } else {
        x
    };
    let n = x.len();
    let half = n / 2;
    let mut approx = vec![0.0; half];
    let mut detail = vec![0.0; half];
    for k in 0..half {
        let mut a = 0.0;
        let mut d = 0.0;
        for (tap, (&h, &g)) in fb.lowpass.iter().zip(&fb.highpass).enumerate() {
            let v = x[(2 * k + tap) % n];
            a += h * v;
            d += g * v;
        }
        approx[k] = a;
        detail[k] = d;
    }
    Ok((approx, detail))
}

/// Inverse of [`dwt_level`]; returns `2 * approx.len()` samples.
pub fn idwt_level(approx: &[f64], detail: &[f64], fb: &FilterBank) -> Result<Vec<f64>, SignalError> {
    if approx.len() != detail.len() {
        return Err(SignalError::LengthMismatch(approx.len(), detail.len()));
    }
    let n = 2 * approx.len();
    let mut out = vec![0.0; n];
    if n == 0 {
        return Ok(out);
    }
    for (k, (&a, &d)) in approx.iter().zip(detail).enumerate() {
        for (tap, (&h, &g)) in fb.lowpass.iter().zip(&fb.highpass).enumerate() {
            out[(2 * k + tap) % n] += h * a + g * d;
        }
    }
    Ok(out)
}

/// Multi-level decomposition. `details[0]` is the finest (level 1) band.
#[derive(Debug, Clone, PartialEq)]
pub struct DwtCoeffs {
    pub approximation: Vec<f64>,
    pub details: Vec<Vec<f64>>,
    pub levels: usize,
    /// Input length seen at each level before padding; `input_lengths[0]` is the signal length.
    pub input_lengths: Vec<usize>,
}

pub fn dwt(x: &[f64], levels: usize, fb: &FilterBank) -> Result<DwtCoeffs, SignalError> {
    if levels == 0 {
        return Err(SignalError::InvalidLevel);
    }
    if x.is_empty() {
        return Err(SignalError::EmptyInput);
    }
    let min = 1usize << levels;
    if x.len() < min {
        return Err(SignalError::TooShort { len: x.len(), min });
    }
    let mut current = x.to_vec();
    let mut details = Vec::with_capacity(levels);
    let mut input_lengths = Vec::with_capacity(levels);
    for _ in 0..levels {
        input_lengths.push(current.len());
        let (a, d) = dwt_level(&current, fb)?;
        details.push(d);
        current = a;
    }
    Ok(DwtCoeffs {
        approximation: current,
        details,
        levels,
        input_lengths,
    })
}

pub fn idwt(coeffs: &DwtCoeffs, fb: &FilterBank) -> Result<Vec<f64>, SignalError> {
    let mut current = coeffs.approximation.clone();
    for level in (0..coeffs.levels).rev() {
        let mut rec = idwt_level(&current, &coeffs.details[level], fb)?;
        rec.truncate(coeffs.input_lengths[level]);
        current = rec;
    }
    Ok(current)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubbandOrdering {
    /// Filter-path order: bit `i` (from the most significant) is 1 when the
    /// `i`-th filtering step took the highpass branch.
    Natural,
    /// Increasing-frequency order.
    Sequency,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WpdTree {
    pub level: usize,
    pub subbands: Vec<Vec<f64>>,
    pub ordering: SubbandOrdering,
}

impl WpdTree {
    /// Reorders natural-order subbands by frequency (Gray-code permutation).
    pub fn sequency_view(&self) -> WpdTree {
        match self.ordering {
            SubbandOrdering::Sequency => self.clone(),
            SubbandOrdering::Natural => WpdTree {
                level: self.level,
                subbands: (0..self.subbands.len())
                    .map(|k| self.subbands[k ^ (k >> 1)].clone())
                    .collect(),
                ordering: SubbandOrdering::Sequency,
            },
        }
    }

    pub fn total_energy(&self) -> f64 {
        self.subbands.iter().map(|b| super::energy(b)).sum()
    }

    pub fn coefficient_count(&self) -> usize {
        self.subbands.iter().map(Vec::len).sum()
    }
}

/// Full wavelet packet tree: both branches are split at every level.
pub fn wpd(x: &[f64], level: usize, fb: &FilterBank) -> Result<WpdTree, SignalError> {
    if level == 0 {
        return Err(SignalError::InvalidLevel);
    }
    let min = 1usize << level;
    if x.len() < min {
        return Err(SignalError::TooShort { len: x.len(), min });
    }
    let mut nodes = vec![x.to_vec()];
    for _ in 0..level {
        let mut next = Vec::with_capacity(nodes.len() * 2);
        for node in &nodes {
            let (a, d) = dwt_level(node, fb)?;
            next.push(a);
            next.push(d);
        }
        nodes = next;
    }
    Ok(WpdTree {
        level,
        subbands: nodes,
        ordering: SubbandOrdering::Natural,
    })
}

static DAUBECHIES: [&[f64]; 10] = [
    // db1
    &[
        0.7071067811865476,
        0.7071067811865476,
    ],
    // db2
    &[
        0.48296291314453416,
        0.8365163037378079,
        0.2241438680420134,
        -0.12940952255126037,
    ],
    // db3
    &[
        0.33267055295008263,
        0.8068915093110925,
        0.45987750211849154,
        -0.13501102001025458,
        -0.08544127388202666,
        0.03522629188570953,
    ],
    // db4
    &[
        0.2303778133088965,
        0.7148465705529157,
        0.6308807679298589,
        -0.027983769416859854,
        -0.18703481171909309,
        0.030841381835560764,
        0.0328830116668852,
        -0.010597401785069032,
    ],
    // db5
    &[
        0.16010239797419293,
        0.6038292697971896,
        0.7243085284377729,
        0.13842814590132074,
        -0.24229488706638203,
        -0.032244869584638375,
        0.07757149384004572,
        -0.006241490212798274,
        -0.012580751999081999,
        0.0033357252854737712,
    ],
    // db6
    &[
        0.11154074335010947,
        0.49462389039845306,
        0.7511339080210954,
        0.31525035170919763,
        -0.22626469396543983,
        -0.12976686756726194,
        0.09750160558732304,
        0.027522865530305727,
        -0.03158203931748603,
        0.0005538422011614961,
        0.004777257510945511,
        -0.0010773010853084796,
    ],
    // db7
    &[
        0.07785205408500918,
        0.3965393194819173,
        0.7291320908462351,
        0.4697822874051931,
        -0.14390600392856498,
        -0.22403618499387498,
        0.07130921926683026,
        0.08061260915108308,
        -0.03802993693501441,
        -0.01657454163066688,
        0.01255099855609984,
        0.0004295779729213665,
        -0.0018016407040474908,
        0.00035371379997452024,
    ],
    // db8
    &[
        0.05441584224310401,
        0.31287159091429995,
        0.6756307362972898,
        0.5853546836542067,
        -0.015829105256349306,
        -0.2840155429615469,
        0.0004724845739132828,
        0.12874742662047847,
        -0.017369301001807547,
        -0.044088253930794755,
        0.013981027917398282,
        0.008746094047405777,
        -0.004870352993451574,
        -0.00039174037337694705,
        0.0006754494064505693,
        -0.00011747678412476953,
    ],
    // db9
    &[
        0.038077947363878345,
        0.24383467461259034,
        0.6048231236901112,
        0.6572880780513005,
        0.13319738582500756,
        -0.2932737832791749,
        -0.09684078322297646,
        0.14854074933810638,
        0.03072568147933338,
        -0.06763282906132997,
        0.00025094711483145197,
        0.022361662123679096,
        -0.004723204757751397,
        -0.00428150368246343,
        0.0018476468830562265,
        0.00023038576352319597,
        -0.0002519631889427101,
        3.93473203162716e-05,
    ],
    // db10
    &[
        0.026670057900555554,
        0.1881768000776915,
        0.5272011889317256,
        0.6884590394536035,
        0.2811723436605775,
        -0.24984642432731538,
        -0.19594627437737705,
        0.12736934033579325,
        0.09305736460357235,
        -0.07139414716639708,
        -0.029457536821875813,
        0.033212674059341,
        0.0036065535669561697,
        -0.010733175483330575,
        0.001395351747052901,
        0.001992405295185056,
        -0.0006858566949597116,
        -0.00011646685512928545,
        9.358867032006959e-05,
        -1.3264202894521244e-05,
    ],
];
