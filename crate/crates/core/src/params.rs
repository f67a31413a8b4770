//! Per-parameter values laid out like an [`Mlp`]'s weights and biases.

use crate::error::Result;
use crate::network::{Mlp, ParamId};

#[derive(Clone, Debug, PartialEq)]
pub struct LayerValues<T> {
    /// Row-major, `out_width × in_width`.
    pub weights: Vec<T>,
    pub biases: Vec<T>,
    in_width: usize,
}

impl<T> LayerValues<T> {
    pub fn in_width(&self) -> usize {
        self.in_width
    }
}

/// One value per network parameter, e.g. a gradient or a trainable mask.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamSet<T> {
    layers: Vec<LayerValues<T>>,
}

impl<T: Clone> ParamSet<T> {
    pub fn shaped_like(mlp: &Mlp, fill: T) -> Self {
        ParamSet {
            layers: mlp
                .layers()
                .iter()
                .map(|l| LayerValues {
                    weights: vec![fill.clone(); l.weights().len()],
                    biases: vec![fill.clone(); l.biases().len()],
                    in_width: l.in_width(),
                })
                .collect(),
        }
    }

    /// Builds from per-layer widths `(in_width, out_width)`.
    pub fn with_widths(widths: impl IntoIterator<Item = (usize, usize)>, fill: T) -> Self {
        ParamSet {
            layers: widths
                .into_iter()
                .map(|(i, o)| LayerValues {
                    weights: vec![fill.clone(); i * o],
                    biases: vec![fill.clone(); o],
                    in_width: i,
                })
                .collect(),
        }
    }
}

impl<T> ParamSet<T> {
    pub fn layers(&self) -> &[LayerValues<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [LayerValues<T>] {
        &mut self.layers
    }

    fn slot(&self, id: ParamId) -> Option<(usize, bool, usize)> {
        let m = id.layer().checked_sub(1)?;
        let l = self.layers.get(m)?;
        match id {
            ParamId::Weight { row, col, .. } => {
                let (r, c) = (row.checked_sub(1)?, col.checked_sub(1)?);
                (c < l.in_width && r * l.in_width + c < l.weights.len()).then_some((
                    m,
                    true,
                    r * l.in_width + c,
                ))
            }
            ParamId::Bias { row, .. } => {
                let r = row.checked_sub(1)?;
                (r < l.biases.len()).then_some((m, false, r))
            }
        }
    }

    pub fn get(&self, id: ParamId) -> Option<&T> {
        let (m, w, k) = self.slot(id)?;
        let l = &self.layers[m];
        Some(if w { &l.weights[k] } else { &l.biases[k] })
    }

    pub fn get_mut(&mut self, id: ParamId) -> Option<&mut T> {
        let (m, w, k) = self.slot(id)?;
        let l = &mut self.layers[m];
        Some(if w {
            &mut l.weights[k]
        } else {
            &mut l.biases[k]
        })
    }

    /// All values, layer by layer, weights before biases.
    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.biases))
    }

    /// Applies `f` to corresponding entries of `self` and `other`.
    pub fn zip_map<U, V>(
        &self,
        other: &ParamSet<U>,
        mut f: impl FnMut(&T, &U) -> V,
    ) -> ParamSet<V> {
        ParamSet {
            layers: self
                .layers
                .iter()
                .zip(&other.layers)
                .map(|(a, b)| LayerValues {
                    weights: a
                        .weights
                        .iter()
                        .zip(&b.weights)
                        .map(|(x, y)| f(x, y))
                        .collect(),
                    biases: a
                        .biases
                        .iter()
                        .zip(&b.biases)
                        .map(|(x, y)| f(x, y))
                        .collect(),
                    in_width: a.in_width,
                })
                .collect(),
        }
    }

    pub fn map<V>(&self, mut f: impl FnMut(&T) -> V) -> ParamSet<V> {
        ParamSet {
            layers: self
                .layers
                .iter()
                .map(|a| LayerValues {
                    weights: a.weights.iter().map(&mut f).collect(),
                    biases: a.biases.iter().map(&mut f).collect(),
                    in_width: a.in_width,
                })
                .collect(),
        }
    }
}

impl ParamSet<f64> {
    /// Current parameter values of `mlp`.
    pub fn from_mlp(mlp: &Mlp) -> Self {
        ParamSet {
            layers: mlp
                .layers()
                .iter()
                .map(|l| LayerValues {
                    weights: l.weights().to_vec(),
                    biases: l.biases().to_vec(),
                    in_width: l.in_width(),
                })
                .collect(),
        }
    }

    pub(crate) fn add_assign(&mut self, other: &ParamSet<f64>) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.weights.iter_mut().zip(&b.weights) {
                *x += y;
            }
            for (x, y) in a.biases.iter_mut().zip(&b.biases) {
                *x += y;
            }
        }
    }

    pub(crate) fn scale(&mut self, s: f64) {
        for l in &mut self.layers {
            for x in l.weights.iter_mut().chain(l.biases.iter_mut()) {
                *x *= s;
            }
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.iter().fold(0.0, |acc, x| acc.max(x.abs()))
    }
}

impl ParamSet<bool> {
    /// Mask with `true` exactly at `ids`.
    pub fn mask_of(mlp: &Mlp, ids: &[ParamId]) -> Result<Self> {
        let mut mask = ParamSet::shaped_like(mlp, false);
        for &id in ids {
            mlp.get(id)?;
            *mask.get_mut(id).expect("id validated against the network") = true;
        }
        Ok(mask)
    }

    pub fn count_true(&self) -> usize {
        self.iter().filter(|&&b| b).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Activation, Layer};

    fn net() -> Mlp {
        Mlp::new(
            2,
            vec![
                Layer::new(
                    2,
                    3,
                    (0..6).map(f64::from).collect(),
                    vec![10.0, 11.0, 12.0],
                    Activation::TanSigmoid,
                )
                .unwrap(),
                Layer::new(3, 1, vec![20.0, 21.0, 22.0], vec![30.0], Activation::Linear).unwrap(),
            ],
        )
        .unwrap()
    }

    #[test]
    fn addressing_agrees_with_network() {
        let mlp = net();
        let set = ParamSet::from_mlp(&mlp);
        for id in mlp.param_ids() {
            assert_eq!(*set.get(id).unwrap(), mlp.get(id).unwrap(), "{id}");
        }
        assert!(set.get(ParamId::weight(1, 1, 3)).is_none());
        assert!(set.get(ParamId::bias(2, 2)).is_none());
        assert_eq!(set.iter().count(), mlp.parameter_count());
    }

    #[test]
    fn mask_marks_only_requested() {
        let mlp = net();
        let ids = [ParamId::weight(1, 2, 1), ParamId::bias(2, 1)];
        let mask = ParamSet::mask_of(&mlp, &ids).unwrap();
        assert_eq!(mask.count_true(), 2);
        assert!(mask.get(ids[0]).copied().unwrap());
        assert!(ParamSet::mask_of(&mlp, &[ParamId::bias(3, 1)]).is_err());
    }
}
