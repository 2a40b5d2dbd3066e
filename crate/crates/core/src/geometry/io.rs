//! JSON form shared by single polyhedra and unions:
//! `{"dim": n, "pieces": [{"H": [[...]], "h": [...]}]}`.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Real;

use super::{HPolyhedron, PolyUnion};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct PieceDoc<T> {
    #[serde(rename = "H")]
    pub h_mat: Vec<Vec<T>>,
    #[serde(rename = "h")]
    pub h_vec: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct UnionDoc<T> {
    pub dim: usize,
    pub pieces: Vec<PieceDoc<T>>,
}

impl<T: Real> PieceDoc<T> {
    fn from_poly(p: &HPolyhedron<T>) -> Self {
        Self {
            h_mat: p.h_mat().to_rows(),
            h_vec: p.h_vec().to_vec(),
        }
    }

    fn to_poly(&self, dim: usize, index: usize) -> Result<HPolyhedron<T>> {
        let m = Matrix::from_rows(&self.h_mat, dim)
            .map_err(|e| Error::Format(format!("pieces[{index}].H: {e}")))?;
        HPolyhedron::new(m, self.h_vec.clone())
            .map_err(|e| Error::Format(format!("pieces[{index}]: {e}")))
    }
}

impl<T: Real> UnionDoc<T> {
    pub fn from_union(u: &PolyUnion<T>) -> Self {
        Self {
            dim: u.dim(),
            pieces: u.pieces().iter().map(PieceDoc::from_poly).collect(),
        }
    }

    pub fn from_poly(p: &HPolyhedron<T>) -> Self {
        Self {
            dim: p.dim(),
            pieces: vec![PieceDoc::from_poly(p)],
        }
    }

    pub fn to_union(&self) -> Result<PolyUnion<T>> {
        let pieces = self.polys()?;
        PolyUnion::new(self.dim, pieces)
    }

    pub fn to_poly(&self) -> Result<HPolyhedron<T>> {
        if self.pieces.len() != 1 {
            return Err(Error::Format(format!(
                "expected exactly one piece, found {}",
                self.pieces.len()
            )));
        }
        self.pieces[0].to_poly(self.dim, 0)
    }

    fn polys(&self) -> Result<Vec<HPolyhedron<T>>> {
        self.pieces
            .iter()
            .enumerate()
            .map(|(i, p)| p.to_poly(self.dim, i))
            .collect()
    }
}

impl<T: Real> Serialize for HPolyhedron<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        UnionDoc::from_poly(self).serialize(s)
    }
}

impl<'de, T: Real> Deserialize<'de> for HPolyhedron<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        UnionDoc::<T>::deserialize(d)?
            .to_poly()
            .map_err(serde::de::Error::custom)
    }
}

impl<T: Real> Serialize for PolyUnion<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        UnionDoc::from_union(self).serialize(s)
    }
}

impl<'de, T: Real> Deserialize<'de> for PolyUnion<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        UnionDoc::<T>::deserialize(d)?
            .to_union()
            .map_err(serde::de::Error::custom)
    }
}
