use serde::{Deserialize, Serialize};

/// Offloading decision for every user: `None` runs the small model on the
/// device, `Some(j)` offloads to edge server `j`.
///
/// Holding one optional index per user makes "at most one server per user"
/// and binary decisions structural.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Assignment {
    server_of: Vec<Option<usize>>,
}

impl Assignment {
    pub fn all_local(n_users: usize) -> Self {
        Self {
            server_of: vec![None; n_users],
        }
    }

    pub fn from_servers(server_of: Vec<Option<usize>>) -> Self {
        Self { server_of }
    }

    pub fn n_users(&self) -> usize {
        self.server_of.len()
    }

    pub fn server_of(&self, user: usize) -> Option<usize> {
        self.server_of[user]
    }

    pub fn as_slice(&self) -> &[Option<usize>] {
        &self.server_of
    }

    pub fn is_offloaded(&self, user: usize) -> bool {
        self.server_of[user].is_some()
    }

    pub fn assign(&mut self, user: usize, server: usize) {
        self.server_of[user] = Some(server);
    }

    pub fn unassign(&mut self, user: usize) {
        self.server_of[user] = None;
    }

    pub fn offload_count(&self) -> usize {
        self.server_of.iter().filter(|s| s.is_some()).count()
    }

    /// Users connected to each server.
    pub fn load(&self, n_servers: usize) -> Vec<usize> {
        let mut load = vec![0; n_servers];
        for j in self.server_of.iter().flatten() {
            load[*j] += 1;
        }
        load
    }

    pub fn connected(&self, server: usize) -> usize {
        self.server_of.iter().filter(|s| **s == Some(server)).count()
    }

    pub fn offloaded_users(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.server_of
            .iter()
            .enumerate()
            .filter_map(|(i, s)| s.map(|j| (i, j)))
    }

    /// Binary matrix view, `x[i][j] == 1` iff user `i` is on server `j`.
    pub fn to_matrix(&self, n_servers: usize) -> Vec<Vec<u8>> {
        self.server_of
            .iter()
            .map(|s| {
                let mut row = vec![0u8; n_servers];
                if let Some(j) = s {
                    row[*j] = 1;
                }
                row
            })
            .collect()
    }

    /// Checks sizes and server indices against an `n_users × n_servers` world.
    pub fn is_valid_for(&self, n_users: usize, n_servers: usize) -> bool {
        self.server_of.len() == n_users
            && self.server_of.iter().flatten().all(|j| *j < n_servers)
    }
}
