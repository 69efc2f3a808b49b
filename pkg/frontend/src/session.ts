import { ApiClient, ApiError, type Role } from "./api";

/**
 * In-memory session. Tokens are never persisted; a reload means a fresh
 * login, which is the cheap answer to token theft via storage.
 */
export class Session {
  role: Role | null = null;
  subject: string | null = null;
  private expiresAt = 0;
  private onExpired: () => void;

  constructor(
    public api: ApiClient,
    onExpired: () => void = () => {},
    private now: () => number = () => Date.now(),
  ) {
    this.onExpired = onExpired;
  }

  get authenticated(): boolean {
    return this.api.token !== null && this.now() < this.expiresAt;
  }

  async login(username: string, password: string) {
    const row = await this.api.login(username, password);
    this.role = row.role;
    this.subject = row.subject;
    this.expiresAt = this.now() + row.expires_in * 1000;
    return row;
  }

  logout() {
    this.api.token = null;
    this.role = null;
    this.subject = null;
    this.expiresAt = 0;
  }

  /**
   * Run an API call; a 401 means the token is gone or expired, so drop the
   * session and bounce the user to the login view instead of surfacing a
   * raw error.
   */
  async guard<T>(call: () => Promise<T>): Promise<T> {
    if (this.api.token !== null && this.now() >= this.expiresAt) {
      this.logout();
      this.onExpired();
      throw new ApiError(401, "expired", "session expired");
    }
    try {
      return await call();
    } catch (err) {
      if (err instanceof ApiError && err.status === 401) {
        this.logout();
        this.onExpired();
      }
      throw err;
    }
  }
}
