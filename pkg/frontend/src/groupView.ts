/**
 * View model for a group page: which controls render is derived from the
 * server's `writable` flag, never from the client's idea of the user's
 * role. Read-only mirrors therefore show no mutation controls to anyone,
 * admins included; the one affordance they keep is "copy to my groups".
 */

import type { GroupDetail } from "./api.js";

export interface GroupControls {
  showAddResource: boolean;
  showEditMetadata: boolean;
  showDeleteResource: boolean;
  showAnnotate: boolean;
  showCreateSubgroup: boolean;
  showCopyGroup: boolean;
  showJoin: boolean;
  readOnlyBadge: boolean;
}

export function deriveControls(
  detail: GroupDetail,
  loggedIn: boolean,
): GroupControls {
  const writable = detail.writable && loggedIn;
  const isMember = detail.writable; // server already folds membership in
  return {
    showAddResource: writable,
    showEditMetadata: writable,
    showDeleteResource: writable,
    showAnnotate: writable,
    showCreateSubgroup: writable && detail.group.parent_group === null,
    showCopyGroup: loggedIn,
    showJoin: loggedIn && !isMember && !detail.group.read_only,
    readOnlyBadge: detail.group.read_only,
  };
}

/** Every control id that can mutate the group, for exhaustive gating tests. */
export function mutationControlIds(controls: GroupControls): string[] {
  const ids: string[] = [];
  if (controls.showAddResource) ids.push("add-resource");
  if (controls.showEditMetadata) ids.push("edit-metadata");
  if (controls.showDeleteResource) ids.push("delete-resource");
  if (controls.showAnnotate) ids.push("annotate");
  if (controls.showCreateSubgroup) ids.push("create-subgroup");
  return ids;
}
