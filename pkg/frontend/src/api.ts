/**
 * Typed client for the curation service's JSON API.
 *
 * The fetch function is injectable so tests can stub the network. All
 * methods reject with ApiError carrying the server's machine-readable
 * error code (e.g. "ReadOnlyGroup", "SessionExpired").
 */

export interface GroupSummary {
  id: string;
  title: string;
  description: string;
  origin: "ingested" | "user_created";
  read_only: boolean;
  parent_group: string | null;
  public: boolean;
  collecting_institution: string | null;
  subjects: string[];
}

export interface ResourceSummary {
  id: string;
  group_id: string;
  subgroup_id: string | null;
  url: string;
  title: string;
  description: string;
  subjects: string[];
  collector: string;
  creator: string;
  language: string;
  media_type: string;
  availability: string;
  thumbnail_ref: string | null;
}

export interface GroupDetail {
  group: GroupSummary;
  subgroups: GroupSummary[];
  resources: ResourceSummary[];
  members: { user: string; member_role: string }[];
  writable: boolean;
}

export interface TimelineBucket {
  month: string; // "YYYY-MM"
  count: number;
}

export interface Timeline {
  resource_id: string;
  buckets: TimelineBucket[];
  span: { first: string | null; last: string | null; count: number };
}

export interface UrlStatus {
  url: string;
  status: "indexed" | "never_indexed";
  first_capture: string | null;
  last_capture: string | null;
}

export interface SearchResult {
  kind: "archive" | "live";
  url: string;
  title: string;
  snippet: string;
  resource_id: string | null;
  group_id: string | null;
}

export interface SearchResponse {
  total: number;
  page: number;
  page_size: number;
  provider_warning: boolean;
  facet_counts: Record<string, Record<string, number>>;
  results: SearchResult[];
}

export interface Session {
  token: string;
  user_id: string;
  username: string;
  role: string;
}

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly code: string,
    message: string,
  ) {
    super(message);
  }
}

export type FetchLike = (
  url: string,
  init?: { method?: string; headers?: Record<string, string>; body?: string },
) => Promise<{ status: number; json(): Promise<unknown> }>;

export class ApiClient {
  private token: string | null = null;

  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  setToken(token: string | null): void {
    this.token = token;
  }

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
  ): Promise<T> {
    const headers: Record<string, string> = {};
    if (this.token) headers["Authorization"] = `Bearer ${this.token}`;
    if (body !== undefined) headers["Content-Type"] = "application/json";
    const response = await this.fetchFn(`${this.baseUrl}${path}`, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const payload = (await response.json()) as Record<string, unknown>;
    if (response.status >= 400) {
      throw new ApiError(
        response.status,
        String(payload["code"] ?? "UnknownError"),
        String(payload["message"] ?? `HTTP ${response.status}`),
      );
    }
    return payload as T;
  }

  async login(username: string, credential: string): Promise<Session> {
    const session = await this.request<Session>("POST", "/api/session", {
      username,
      credential,
    });
    this.token = session.token;
    return session;
  }

  listGroups(query = ""): Promise<{ groups: GroupSummary[] }> {
    const suffix = query ? `?query=${encodeURIComponent(query)}` : "";
    return this.request("GET", `/api/groups${suffix}`);
  }

  getGroup(groupId: string): Promise<GroupDetail> {
    return this.request("GET", `/api/groups/${groupId}`);
  }

  getTimeline(resourceId: string): Promise<Timeline> {
    return this.request("GET", `/api/resources/${resourceId}/timeline`);
  }

  getUrlStatus(url: string): Promise<UrlStatus> {
    return this.request("GET", `/api/url-status?url=${encodeURIComponent(url)}`);
  }

  search(queryString: string): Promise<SearchResponse> {
    return this.request("GET", `/api/search?${queryString}`);
  }

  addResource(groupId: string, body: { url: string; title?: string }) {
    return this.request<ResourceSummary>(
      "POST",
      `/api/groups/${groupId}/resources`,
      body,
    );
  }

  addTag(resourceId: string, tag: string) {
    return this.request<{ tag: string }>(
      "POST",
      `/api/resources/${resourceId}/tags/${encodeURIComponent(tag)}`,
    );
  }

  addComment(resourceId: string, text: string) {
    return this.request<{ id: string }>(
      "POST",
      `/api/resources/${resourceId}/annotations`,
      { text },
    );
  }
}
