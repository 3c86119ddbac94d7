//! Browser bindings for three small explorations of the core library. Every
//! export returns a JSON string; errors surface as JS exceptions.

use infoflow::infodyn::{self, RenyiForm, SymbolSeries, TeEstimator};
use infoflow::{spectral, synthetic};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

const MAX_SERIES: usize = 200;
const MAX_LENGTH: usize = 20_000;

fn to_js(r: Result<Value, String>) -> Result<String, JsValue> {
    r.map(|v| v.to_string()).map_err(|e| JsValue::from_str(&e))
}

/// Eigenvalues of the correlation matrix of `n` IID Gaussian series of
/// length `t`, beside the Wishart band.
pub fn noise_spectrum(n: usize, t: usize, seed: u64) -> Result<Value, String> {
    if !(2..=MAX_SERIES).contains(&n) || t > MAX_LENGTH {
        return Err(format!("need 2 <= n <= {MAX_SERIES} and t <= {MAX_LENGTH}"));
    }
    let panel = synthetic::iid_gaussian_panel(n, t, seed);
    let corr = spectral::correlation_matrix(&panel, t).map_err(|e| e.to_string())?;
    let eig = spectral::eigendecompose(&corr, t as f64).map_err(|e| e.to_string())?;
    let inside = eig
        .eigenvalues
        .iter()
        .filter(|&&v| v >= eig.lambda_min && v <= eig.lambda_max)
        .count();
    Ok(json!({
        "eigenvalues": eig.eigenvalues,
        "lambda_min": eig.lambda_min,
        "lambda_max": eig.lambda_max,
        "q_ratio": eig.q_ratio,
        "inside": inside,
    }))
}

/// Escort distribution of `p` at order `q` with its Rényi and Shannon entropies.
pub fn escort_view(p: &[f64], q: f64) -> Result<Value, String> {
    let total: f64 = p.iter().sum();
    if p.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || total <= 0.0 {
        return Err("weights must be non-negative with a positive sum".into());
    }
    let p: Vec<f64> = p.iter().map(|v| v / total).collect();
    let esc = infodyn::escort(&p, q).map_err(|e| e.to_string())?;
    Ok(json!({
        "p": p,
        "escort": esc,
        "renyi": infodyn::renyi_entropy(&p, q).map_err(|e| e.to_string())?,
        "shannon": infodyn::shannon_entropy(&p).map_err(|e| e.to_string())?,
    }))
}

/// Shannon and Rényi TE in both directions for a noisy copy `x(t+1) = y(t)`.
pub fn copy_transfer(
    len: usize,
    alphabet: u8,
    noise: f64,
    q: f64,
    shuffles: usize,
    seed: u64,
) -> Result<Value, String> {
    if len > MAX_LENGTH || !(2..=8).contains(&alphabet) || !(0.0..=1.0).contains(&noise) {
        return Err(format!(
            "need len <= {MAX_LENGTH}, 2 <= alphabet <= 8, 0 <= noise <= 1"
        ));
    }
    let (x, y) = synthetic::noisy_copy_process(len, alphabet, noise, seed);
    let xs = SymbolSeries::from_symbols(x, alphabet).map_err(|e| e.to_string())?;
    let ys = SymbolSeries::from_symbols(y, alphabet).map_err(|e| e.to_string())?;
    let mut qs = vec![1.0];
    if q != 1.0 {
        qs.push(q);
    }
    let est = TeEstimator {
        m: 1,
        l: 1,
        qs,
        n_shuffles: shuffles,
        renyi_form: RenyiForm::Conditional,
    };
    let forward = est.estimate(&xs, &ys, seed).map_err(|e| e.to_string())?;
    let reverse = est.estimate(&ys, &xs, seed).map_err(|e| e.to_string())?;
    Ok(json!({
        "y_to_x": forward.results,
        "x_to_y": reverse.results,
    }))
}

#[wasm_bindgen(js_name = noiseSpectrum)]
pub fn noise_spectrum_js(n: usize, t: usize, seed: u32) -> Result<String, JsValue> {
    to_js(noise_spectrum(n, t, u64::from(seed)))
}

#[wasm_bindgen(js_name = escortView)]
pub fn escort_view_js(p: Vec<f64>, q: f64) -> Result<String, JsValue> {
    to_js(escort_view(&p, q))
}

#[wasm_bindgen(js_name = copyTransfer)]
pub fn copy_transfer_js(
    len: usize,
    alphabet: u8,
    noise: f64,
    q: f64,
    shuffles: usize,
    seed: u32,
) -> Result<String, JsValue> {
    to_js(copy_transfer(
        len,
        alphabet,
        noise,
        q,
        shuffles,
        u64::from(seed),
    ))
}
