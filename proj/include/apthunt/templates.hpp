// SPDX-License-Identifier: Apache-2.0
//
// Parameterized event templates for synthetic scenarios. Placeholders:
//
//   per scenario: {user} {drop} {c2} {task} {lan} {sid}
//   per event:    {hex} {num} {word} {ip} {o} {av}

#pragma once

#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "apthunt/error.hpp"

namespace apthunt::templates {

struct EventTemplate {
  std::string subject;
  std::string action;
  std::string object;

  friend bool operator==(const EventTemplate&, const EventTemplate&) = default;
};

struct TemplateLibrary {
  std::vector<EventTemplate> benign;
  std::map<std::string, std::vector<EventTemplate>> abilities;

  friend bool operator==(const TemplateLibrary&, const TemplateLibrary&) = default;
};

// clang-format off
inline TemplateLibrary builtin() {
  TemplateLibrary lib;
  lib.benign = {
    // browser
    {"chrome.exe", "ReadFile", R"(C:\Users\{user}\AppData\Local\Google\Chrome\User Data\Default\Cache\Cache_Data\f_{hex})"},
    {"chrome.exe", "WriteFile", R"(C:\Users\{user}\AppData\Local\Google\Chrome\User Data\Default\Cache\Cache_Data\f_{hex})"},
    {"chrome.exe", "TCP Connect", R"({lan} -> {ip}:https)"},
    {"chrome.exe", "TCP Receive", R"({lan} -> {ip}:https)"},
    {"chrome.exe", "RegQueryValue", R"(HKCU\Software\Google\Chrome\PreferenceMACs\Default\{word})"},
    {"chrome.exe", "CreateFile", R"(C:\Users\{user}\Downloads\{word}_{num}.pdf)"},
    {"chrome.exe", "QueryBasicInformationFile", R"(C:\Users\{user}\AppData\Local\Google\Chrome\User Data\Default\Cookies)"},
    {"msedge.exe", "ReadFile", R"(C:\Users\{user}\AppData\Local\Microsoft\Edge\User Data\Default\History)"},
    {"msedge.exe", "TCP Send", R"({lan} -> {ip}:https)"},
    {"msedge.exe", "RegOpenKey", R"(HKCU\Software\Microsoft\Edge\BLBeacon)"},
    // office
    {"WINWORD.EXE", "CreateFile", R"(C:\Users\{user}\Documents\{word}_{num}.docx)"},
    {"WINWORD.EXE", "ReadFile", R"(C:\Users\{user}\Documents\{word}_{num}.docx)"},
    {"WINWORD.EXE", "WriteFile", R"(C:\Users\{user}\AppData\Roaming\Microsoft\Word\~WRL{num}.tmp)"},
    {"WINWORD.EXE", "RegQueryValue", R"(HKCU\Software\Microsoft\Office\16.0\Word\Options\{word})"},
    {"WINWORD.EXE", "Load Image", R"(C:\Program Files\Microsoft Office\root\Office16\MSO.DLL)"},
    {"EXCEL.EXE", "CreateFile", R"(C:\Users\{user}\Documents\{word}_report_{num}.xlsx)"},
    {"EXCEL.EXE", "RegOpenKey", R"(HKCU\Software\Microsoft\Office\16.0\Excel\Options)"},
    {"EXCEL.EXE", "WriteFile", R"(C:\Users\{user}\Documents\{word}_report_{num}.xlsx)"},
    {"OUTLOOK.EXE", "ReadFile", R"(C:\Users\{user}\AppData\Local\Microsoft\Outlook\{user}@corp.local.ost)"},
    {"OUTLOOK.EXE", "WriteFile", R"(C:\Users\{user}\AppData\Local\Microsoft\Outlook\{user}@corp.local.ost)"},
    {"OUTLOOK.EXE", "TCP Connect", R"({lan} -> outlook.office365.com:https)"},
    {"OUTLOOK.EXE", "RegQueryValue", R"(HKCU\Software\Microsoft\Office\16.0\Outlook\Profiles\Outlook\{hex})"},
    {"Teams.exe", "TCP Receive", R"({lan} -> teams.microsoft.com:https)"},
    {"Teams.exe", "WriteFile", R"(C:\Users\{user}\AppData\Roaming\Microsoft\Teams\logs.txt)"},
    {"OneDrive.exe", "ReadFile", R"(C:\Users\{user}\OneDrive\{word}\{word}_{num}.docx)"},
    {"OneDrive.exe", "TCP Send", R"({lan} -> onedrive.live.com:https)"},
    // shell and desktop
    {"explorer.exe", "QueryDirectory", R"(C:\Users\{user}\Desktop)"},
    {"explorer.exe", "RegOpenKey", R"(HKCU\Software\Microsoft\Windows\CurrentVersion\Explorer\RecentDocs)"},
    {"explorer.exe", "RegQueryValue", R"(HKCU\Software\Microsoft\Windows\CurrentVersion\Explorer\Advanced\{word})"},
    {"explorer.exe", "CreateFile", R"(C:\Users\{user}\Pictures\IMG_{num}.jpg)"},
    {"explorer.exe", "RegSetValue", R"(HKCU\Software\Microsoft\Windows\CurrentVersion\Explorer\UserAssist\{hex}\Count)"},
    {"explorer.exe", "Process Create", R"(C:\Program Files\Google\Chrome\Application\chrome.exe)"},
    {"notepad.exe", "CreateFile", R"(C:\Users\{user}\Desktop\notes_{num}.txt)"},
    {"Code.exe", "ReadFile", R"(C:\Users\{user}\source\repos\{word}\src\{word}.cs)"},
    {"Code.exe", "WriteFile", R"(C:\Users\{user}\source\repos\{word}\src\{word}.cs)"},
    // system services and registry housekeeping
    {"svchost.exe", "RegQueryValue", R"(HKLM\System\CurrentControlSet\Services\{word}\Start)"},
    {"svchost.exe", "RegOpenKey", R"(HKLM\SOFTWARE\Microsoft\Windows NT\CurrentVersion\Schedule\TaskCache)"},
    {"svchost.exe", "ReadFile", R"(C:\Windows\System32\config\SOFTWARE)"},
    {"svchost.exe", "UDP Send", R"({lan} -> 10.0.0.2:domain)"},
    {"svchost.exe", "TCP Connect", R"({lan} -> {ip}:http)"},
    {"svchost.exe", "Process Create", R"(C:\Windows\System32\backgroundTaskHost.exe)"},
    {"svchost.exe", "RegCloseKey", R"(HKLM\SOFTWARE\Microsoft\Windows\CurrentVersion\{word})"},
    {"services.exe", "RegOpenKey", R"(HKLM\System\CurrentControlSet\Services\{word})"},
    {"lsass.exe", "RegQueryValue", R"(HKLM\SECURITY\Policy\{word})"},
    {"taskhostw.exe", "ReadFile", R"(C:\Windows\System32\Tasks\Microsoft\Windows\{word}\{word})"},
    {"SearchIndexer.exe", "ReadFile", R"(C:\Users\{user}\Documents\{word}_{num}.txt)"},
    {"SearchIndexer.exe", "WriteFile", R"(C:\ProgramData\Microsoft\Search\Data\Applications\Windows\Windows.edb)"},
    {"MsMpEng.exe", "ReadFile", R"(C:\Windows\System32\{word}.dll)"},
    {"MsMpEng.exe", "RegQueryValue", R"(HKLM\SOFTWARE\Microsoft\Windows Defender\Signature Updates\{word})"},
    {"RuntimeBroker.exe", "RegOpenKey", R"(HKCU\Software\Microsoft\Windows\CurrentVersion\Notifications\Settings\{word})"},
  };

  lib.abilities = {
    {"PA", {  // phishing attachment
      {"OUTLOOK.EXE", "CreateFile", R"(C:\Users\{user}\AppData\Local\Microsoft\Windows\INetCache\Content.Outlook\{hex}\Invoice_{num}.doc)"},
      {"OUTLOOK.EXE", "WriteFile", R"(C:\Users\{user}\AppData\Local\Microsoft\Windows\INetCache\Content.Outlook\{hex}\Invoice_{num}.doc)"},
      {"WINWORD.EXE", "ReadFile", R"(C:\Users\{user}\AppData\Local\Microsoft\Windows\INetCache\Content.Outlook\{hex}\Invoice_{num}.doc)"},
      {"WINWORD.EXE", "TCP Connect", R"({lan} -> {c2}:http)"},
    }},
    {"MFE", {  // malicious file execution
      {"WINWORD.EXE", "Process Create", R"(C:\Users\{user}\AppData\Local\Temp\{drop}.exe)"},
      {"{drop}.exe", "Load Image", R"(C:\Users\{user}\AppData\Local\Temp\{drop}.exe)"},
      {"{drop}.exe", "Thread Create", R"(C:\Users\{user}\AppData\Local\Temp\{drop}.exe)"},
      {"{drop}.exe", "CreateFile", R"(C:\Users\{user}\AppData\Local\Temp\{hex}.tmp)"},
    }},
    {"RK", {  // registry run keys
      {"reg.exe", "RegCreateKey", R"(HKCU\Software\Microsoft\Windows\CurrentVersion\Run)"},
      {"reg.exe", "RegSetValue", R"(HKCU\Software\Microsoft\Windows\CurrentVersion\Run\{drop})"},
      {"{drop}.exe", "RegQueryValue", R"(HKCU\Software\Microsoft\Windows\CurrentVersion\Run\{drop})"},
    }},
    {"SID", {  // system information discovery
      {"cmd.exe", "Process Create", R"(C:\Windows\System32\systeminfo.exe)"},
      {"systeminfo.exe", "RegQueryValue", R"(HKLM\SOFTWARE\Microsoft\Windows NT\CurrentVersion\ProductName)"},
      {"systeminfo.exe", "RegQueryValue", R"(HKLM\SOFTWARE\Microsoft\Windows NT\CurrentVersion\InstallDate)"},
      {"systeminfo.exe", "RegQueryValue", R"(HKLM\HARDWARE\DESCRIPTION\System\BIOS\SystemManufacturer)"},
    }},
    {"SNCD", {  // system network configuration discovery
      {"cmd.exe", "Process Create", R"(C:\Windows\System32\ipconfig.exe)"},
      {"ipconfig.exe", "RegQueryValue", R"(HKLM\System\CurrentControlSet\Services\Tcpip\Parameters\Interfaces\{hex}\DhcpIPAddress)"},
      {"ipconfig.exe", "Load Image", R"(C:\Windows\System32\IPHLPAPI.DLL)"},
    }},
    {"MTOS", {  // masquerade task or service
      {"{drop}.exe", "CreateFile", R"(C:\ProgramData\Microsoft\DeviceSync\svchost.exe)"},
      {"{drop}.exe", "WriteFile", R"(C:\ProgramData\Microsoft\DeviceSync\svchost.exe)"},
      {"{drop}.exe", "SetBasicInformationFile", R"(C:\ProgramData\Microsoft\DeviceSync\svchost.exe)"},
    }},
    {"ST", {  // scheduled task
      {"cmd.exe", "Process Create", R"(C:\Windows\System32\schtasks.exe)"},
      {"schtasks.exe", "WriteFile", R"(C:\Windows\System32\Tasks\{task})"},
      {"schtasks.exe", "RegSetValue", R"(HKLM\SOFTWARE\Microsoft\Windows NT\CurrentVersion\Schedule\TaskCache\Tree\{task}\Id)"},
    }},
    {"WP", {  // web protocols
      {"{drop}.exe", "TCP Connect", R"({lan} -> {c2}:http)"},
      {"{drop}.exe", "TCP Send", R"({lan} -> {c2}:http)"},
      {"{drop}.exe", "TCP Receive", R"({lan} -> {c2}:http)"},
    }},
    {"DLS", {  // data from local system
      {"{drop}.exe", "QueryDirectory", R"(C:\Users\{user}\Documents)"},
      {"{drop}.exe", "ReadFile", R"(C:\Users\{user}\Documents\{word}_{num}.docx)"},
      {"{drop}.exe", "WriteFile", R"(C:\Users\{user}\AppData\Local\Temp\{hex}.rar)"},
    }},
    {"EWS", {  // exfiltration over web service
      {"{drop}.exe", "ReadFile", R"(C:\Users\{user}\AppData\Local\Temp\{hex}.rar)"},
      {"{drop}.exe", "TCP Connect", R"({lan} -> content.dropboxapi.com:https)"},
      {"{drop}.exe", "TCP Send", R"({lan} -> content.dropboxapi.com:https)"},
    }},
    {"RAS", {  // remote access software
      {"{drop}.exe", "Process Create", R"(C:\ProgramData\Ammyy\AA_v3.exe)"},
      {"AA_v3.exe", "RegSetValue", R"(HKLM\SOFTWARE\Ammyy\Admin\hr3)"},
      {"AA_v3.exe", "TCP Connect", R"({lan} -> rl.ammyy.com:https)"},
    }},
    {"NSD", {  // network service discovery
      {"cmd.exe", "Process Create", R"(C:\Windows\System32\net.exe)"},
      {"net.exe", "TCP Connect", R"({lan} -> 10.0.{o}.{o}:microsoft-ds)"},
      {"{drop}.exe", "TCP Connect", R"({lan} -> 10.0.{o}.{o}:{num})"},
    }},
    {"MR", {  // modify registry
      {"reg.exe", "RegOpenKey", R"(HKCU\Software\Microsoft\Office\16.0\Word\Security)"},
      {"reg.exe", "RegSetValue", R"(HKCU\Software\Microsoft\Office\16.0\Word\Security\VBAWarnings)"},
      {"reg.exe", "RegSetValue", R"(HKCU\Software\Microsoft\Office\16.0\Word\Security\AccessVBOM)"},
    }},
    {"WMI", {  // windows management instrumentation
      {"{drop}.exe", "Load Image", R"(C:\Windows\System32\wbem\wbemprox.dll)"},
      {"WmiPrvSE.exe", "RegQueryValue", R"(HKLM\SOFTWARE\Microsoft\WBEM\CIMOM\Logging)"},
      {"WmiPrvSE.exe", "Process Create", R"(C:\Windows\System32\cmd.exe)"},
    }},
    {"DF", {  // defacement
      {"{drop}.exe", "WriteFile", R"(C:\Users\Public\Pictures\wall_{num}.bmp)"},
      {"reg.exe", "RegSetValue", R"(HKCU\Control Panel\Desktop\Wallpaper)"},
      {"{drop}.exe", "WriteFile", R"(C:\Users\{user}\Desktop\README_{num}.txt)"},
    }},
    {"PS", {  // powershell
      {"cmd.exe", "Process Create", R"(C:\Windows\System32\WindowsPowerShell\v1.0\powershell.exe)"},
      {"powershell.exe", "Load Image", R"(C:\Windows\assembly\NativeImages_v4.0.30319_64\System.Management.Automation\{hex}\System.Management.Automation.ni.dll)"},
      {"powershell.exe", "ReadFile", R"(C:\Users\{user}\AppData\Local\Temp\{hex}.ps1)"},
    }},
    {"BUAC", {  // bypass user account control
      {"reg.exe", "RegCreateKey", R"(HKCU\Software\Classes\ms-settings\Shell\Open\command)"},
      {"reg.exe", "RegSetValue", R"(HKCU\Software\Classes\ms-settings\Shell\Open\command\DelegateExecute)"},
      {"fodhelper.exe", "Process Create", R"(C:\Users\{user}\AppData\Local\Temp\{drop}.exe)"},
    }},
    {"UD", {  // system owner/user discovery
      {"cmd.exe", "Process Create", R"(C:\Windows\System32\whoami.exe)"},
      {"whoami.exe", "RegQueryValue", R"(HKLM\SOFTWARE\Microsoft\Windows NT\CurrentVersion\ProfileList\{sid}\ProfileImagePath)"},
      {"whoami.exe", "Load Image", R"(C:\Windows\System32\samcli.dll)"},
    }},
    {"SD", {  // security software discovery
      {"cmd.exe", "Process Create", R"(C:\Windows\System32\tasklist.exe)"},
      {"{drop}.exe", "RegOpenKey", R"(HKLM\SOFTWARE\Microsoft\Windows Defender\Real-Time Protection)"},
      {"{drop}.exe", "QueryDirectory", R"(C:\Program Files\{av})"},
    }},
    {"RDP", {  // remote desktop protocol
      {"reg.exe", "RegSetValue", R"(HKLM\System\CurrentControlSet\Control\Terminal Server\fDenyTSConnections)"},
      {"mstsc.exe", "TCP Connect", R"({lan} -> 10.0.{o}.{o}:ms-wbt-server)"},
      {"mstsc.exe", "TCP Send", R"({lan} -> 10.0.{o}.{o}:ms-wbt-server)"},
    }},
    {"PEI", {  // portable executable injection
      {"{drop}.exe", "Process Create", R"(C:\Windows\System32\rundll32.exe)"},
      {"rundll32.exe", "Thread Create", R"(C:\Windows\System32\rundll32.exe)"},
      {"rundll32.exe", "TCP Connect", R"({lan} -> {c2}:https)"},
    }},
    {"SM", {  // shortcut modification
      {"{drop}.exe", "CreateFile", R"(C:\Users\{user}\AppData\Roaming\Microsoft\Windows\Start Menu\Programs\Startup\{word}.lnk)"},
      {"{drop}.exe", "WriteFile", R"(C:\Users\{user}\AppData\Roaming\Microsoft\Windows\Start Menu\Programs\Startup\{word}.lnk)"},
    }},
    {"DMT", {  // disable or modify tools
      {"reg.exe", "RegSetValue", R"(HKLM\SOFTWARE\Policies\Microsoft\Windows Defender\DisableAntiSpyware)"},
      {"reg.exe", "RegSetValue", R"(HKLM\SOFTWARE\Policies\Microsoft\Windows Defender\Real-Time Protection\DisableRealtimeMonitoring)"},
    }},
    {"HW", {  // hidden window
      {"cmd.exe", "Process Create", R"(C:\Windows\System32\WindowsPowerShell\v1.0\powershell.exe -WindowStyle Hidden)"},
      {"powershell.exe", "RegQueryValue", R"(HKCU\Console\%SystemRoot%_System32_WindowsPowerShell_v1.0_powershell.exe\WindowSize)"},
    }},
  };
  return lib;
}
// clang-format on

inline nlohmann::json to_json(const EventTemplate& t) {
  return {{"subject", t.subject}, {"action", t.action}, {"object", t.object}};
}

inline nlohmann::json to_json(const TemplateLibrary& lib) {
  nlohmann::json benign = nlohmann::json::array();
  for (const auto& t : lib.benign) benign.push_back(to_json(t));
  nlohmann::json abilities = nlohmann::json::object();
  for (const auto& [name, list] : lib.abilities) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& t : list) arr.push_back(to_json(t));
    abilities[name] = std::move(arr);
  }
  return {{"version", 1}, {"benign", std::move(benign)}, {"abilities", std::move(abilities)}};
}

inline TemplateLibrary library_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw SchemaError("/", "expected object");
  auto read_list = [](const nlohmann::json& arr, const std::string& path) {
    if (!arr.is_array() || arr.empty()) throw SchemaError(path, "expected nonempty array");
    std::vector<EventTemplate> out;
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string p = path + "/" + std::to_string(i);
      EventTemplate t;
      for (auto [key, field] : {std::pair{"subject", &t.subject}, {"action", &t.action}, {"object", &t.object}}) {
        auto it = arr[i].find(key);
        if (!arr[i].is_object() || it == arr[i].end() || !it->is_string())
          throw SchemaError(p + "/" + key, "expected string");
        *field = it->get<std::string>();
      }
      out.push_back(std::move(t));
    }
    return out;
  };
  TemplateLibrary lib;
  auto b = j.find("benign");
  if (b == j.end()) throw SchemaError("/benign", "missing field");
  lib.benign = read_list(*b, "/benign");
  auto a = j.find("abilities");
  if (a == j.end() || !a->is_object()) throw SchemaError("/abilities", "expected object");
  for (const auto& [name, list] : a->items()) lib.abilities[name] = read_list(list, "/abilities/" + name);
  return lib;
}

}  // namespace apthunt::templates
