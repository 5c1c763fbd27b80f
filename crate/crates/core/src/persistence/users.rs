use rusqlite::{params, OptionalExtension, Transaction};

use super::password::{hash_password, verify_password};
use super::{
    count, fetch_user, user_from_row, Page, Store, StoreError, StoreResult, UserPatch, USER_COLUMNS,
};
use crate::domain::{validate_user, validate_user_update, AccessLevel, AnnouncementTarget, User, UserDraft, UserId};

fn check_unique(tx: &Transaction<'_>, username: &str, email: &str, except: Option<UserId>) -> StoreResult<()> {
    let except = except.map(|u| u.0).unwrap_or(-1);
    if count(tx, "SELECT COUNT(*) FROM users WHERE username = ?1 AND id <> ?2", params![username, except])? > 0 {
        return Err(StoreError::Duplicate { field: "username" });
    }
    if count(tx, "SELECT COUNT(*) FROM users WHERE email = ?1 AND id <> ?2", params![email, except])? > 0 {
        return Err(StoreError::Duplicate { field: "email" });
    }
    Ok(())
}

impl Store {
    pub fn create_user(&self, draft: &UserDraft) -> StoreResult<User> {
        let new = validate_user(draft).map_err(StoreError::Validation)?;
        let password = new.password.as_deref().expect("validated drafts carry a password");
        // Hash outside the write lock; it is the slow part.
        let hash = hash_password(password, self.config.password_cost)?;
        let now = self.now();
        self.write(|tx| {
            check_unique(tx, &new.username, &new.email, None)?;
            tx.execute(
                "INSERT INTO users (username, password_hash, access_level, first_name, last_name, email, phone, \
                 address, city, postal_code, date_of_birth, registered_at, last_login_at, active) \
                 VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8, ?9, ?10, ?11, ?12, NULL, ?13)",
                params![
                    new.username,
                    hash,
                    new.access_level.code(),
                    new.first_name,
                    new.last_name,
                    new.email,
                    new.phone,
                    new.address,
                    new.city,
                    new.postal_code,
                    new.date_of_birth,
                    now,
                    new.active,
                ],
            )?;
            fetch_user(tx, UserId(tx.last_insert_rowid()))
        })
    }

    pub fn get_user(&self, id: UserId) -> StoreResult<User> {
        self.read(|tx| fetch_user(tx, id))
    }

    pub fn find_user_by_username(&self, username: &str) -> StoreResult<Option<User>> {
        self.read(|tx| {
            Ok(tx
                .query_row(
                    &format!("SELECT {USER_COLUMNS} FROM users WHERE username = ?1"),
                    [username],
                    user_from_row,
                )
                .optional()?)
        })
    }

    pub fn list_users(&self, page: Page) -> StoreResult<Vec<User>> {
        self.read(|tx| {
            let mut stmt = tx.prepare(&format!("SELECT {USER_COLUMNS} FROM users ORDER BY id LIMIT ?1 OFFSET ?2"))?;
            let rows = stmt.query_map(params![i64::from(page.limit), i64::from(page.offset)], user_from_row)?;
            Ok(rows.collect::<Result<_, _>>()?)
        })
    }

    /// Verifies credentials and stamps the login time. Inactive accounts
    /// cannot sign in.
    pub fn authenticate(&self, username: &str, password: &str) -> StoreResult<User> {
        let user = self.find_user_by_username(username)?.ok_or(StoreError::InvalidCredentials)?;
        if !user.active || !verify_password(&user.password_hash, password) {
            return Err(StoreError::InvalidCredentials);
        }
        let now = self.now();
        self.write(|tx| {
            tx.execute("UPDATE users SET last_login_at = ?1 WHERE id = ?2", params![now, user.id.0])?;
            fetch_user(tx, user.id)
        })
    }

    pub fn update_user(&self, id: UserId, patch: &UserPatch) -> StoreResult<User> {
        let current = self.get_user(id)?;
        let draft = UserDraft {
            username: patch.username.clone().unwrap_or(current.username.clone()),
            password: patch.password.clone(),
            access_level: patch.access_level.unwrap_or(current.access_level.code()),
            first_name: patch.first_name.clone().unwrap_or(current.first_name.clone()),
            last_name: patch.last_name.clone().unwrap_or(current.last_name.clone()),
            email: patch.email.clone().unwrap_or(current.email.clone()),
            phone: patch.phone.clone().or(current.phone.clone()),
            address: patch.address.clone().or(current.address.clone()),
            city: patch.city.clone().or(current.city.clone()),
            postal_code: patch.postal_code.clone().or(current.postal_code.clone()),
            date_of_birth: patch.date_of_birth.or(current.date_of_birth),
            active: Some(patch.active.unwrap_or(current.active)),
        };
        let new = validate_user_update(&draft).map_err(StoreError::Validation)?;
        let hash = match new.password.as_deref() {
            Some(p) => Some(hash_password(p, self.config.password_cost)?),
            None => None,
        };
        self.write(|tx| {
            let current = fetch_user(tx, id)?;
            check_unique(tx, &new.username, &new.email, Some(id))?;
            if new.access_level != current.access_level {
                let owned = count(tx, "SELECT COUNT(*) FROM seminars WHERE tutor_id = ?1", [id.0])?;
                let enrolled = count(tx, "SELECT COUNT(*) FROM usersseminars WHERE user_id = ?1", [id.0])?;
                if owned + enrolled > 0 {
                    return Err(StoreError::Conflict(
                        "access level cannot change while the account owns seminars or has enrollments".into(),
                    ));
                }
            }
            tx.execute(
                "UPDATE users SET username = ?1, access_level = ?2, first_name = ?3, last_name = ?4, email = ?5, \
                 phone = ?6, address = ?7, city = ?8, postal_code = ?9, date_of_birth = ?10, active = ?11, \
                 password_hash = COALESCE(?12, password_hash) WHERE id = ?13",
                params![
                    new.username,
                    new.access_level.code(),
                    new.first_name,
                    new.last_name,
                    new.email,
                    new.phone,
                    new.address,
                    new.city,
                    new.postal_code,
                    new.date_of_birth,
                    new.active,
                    hash,
                    id.0,
                ],
            )?;
            fetch_user(tx, id)
        })
    }

    /// Removes an account. Accounts that own seminars are never removed;
    /// other dependents (enrollments, history, sent news, uploads) go only
    /// with `cascade`.
    pub fn delete_user(&self, id: UserId, cascade: bool) -> StoreResult<()> {
        self.write(|tx| {
            fetch_user(tx, id)?;
            if count(tx, "SELECT COUNT(*) FROM seminars WHERE tutor_id = ?1", [id.0])? > 0 {
                return Err(StoreError::Conflict("account still owns seminars".into()));
            }
            let (kind, target) = AnnouncementTarget::User(id).to_columns();
            let dependents = count(
                tx,
                "SELECT (SELECT COUNT(*) FROM usersseminars WHERE user_id = ?1) \
                      + (SELECT COUNT(*) FROM history WHERE user_id = ?1) \
                      + (SELECT COUNT(*) FROM news WHERE sender_id = ?1 OR (target_type = ?2 AND target_id = ?1)) \
                      + (SELECT COUNT(*) FROM files WHERE uploader_id = ?1)",
                params![id.0, kind],
            )?;
            if dependents > 0 && !cascade {
                return Err(StoreError::HasDependents { entity: "user", id: id.0 });
            }
            tx.execute("DELETE FROM news WHERE target_type = ?1 AND target_id = ?2", params![kind, target])?;
            tx.execute("DELETE FROM users WHERE id = ?1", [id.0])?;
            Ok(())
        })?;
        self.collect_orphan_blobs()
    }

    pub fn user_exists_with_level(&self, id: UserId, level: AccessLevel) -> StoreResult<bool> {
        match self.get_user(id) {
            Ok(u) => Ok(u.access_level == level),
            Err(StoreError::NotFound { .. }) => Ok(false),
            Err(e) => Err(e),
        }
    }
}
